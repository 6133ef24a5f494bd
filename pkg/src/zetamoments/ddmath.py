"""Double-double (hi/lo float64 pair) arithmetic for phase-critical sums.

Evaluating Z(t) = 2 sum cos(theta(t) - t log n)/sqrt(n) at t ~ 1e6..1e12
requires the phases theta(t) and t*log(n) modulo 2*pi to ~1e-12 absolute,
far beyond what plain float64 gives once the unreduced phase exceeds ~1e9.
Everything here is vectorized over numpy arrays and portable (no reliance
on x87 long double or FMA).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

_SPLIT = 134217729.0  # 2**27 + 1, Dekker splitting constant

# hi/lo splits of the constants used in phase reduction
TWO_PI = (6.283185307179586, 2.4492935982947064e-16)
PI = (3.141592653589793, 1.2246467991473532e-16)
PI_8 = (0.39269908169872414, 1.5308084989341915e-17)
LN_TWO_PI = (1.8378770664093456, -7.756588316134483e-17)
LN2 = (0.6931471805599453, 2.3190468138462996e-17)


def two_sum(a, b):
    """Error-free sum: returns (s, e) with s + e == a + b exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def fast_two_sum(a, b):
    """Error-free sum assuming |a| >= |b|."""
    s = a + b
    e = b - (s - a)
    return s, e


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """Error-free product: returns (p, e) with p + e == a * b exactly."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    e = e + (al + bl)
    return fast_two_sum(s, e)


def dd_add_f(ah, al, b):
    s, e = two_sum(ah, b)
    return fast_two_sum(s, e + al)


def dd_neg(ah, al):
    return -ah, -al


def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return fast_two_sum(p, e)


def dd_mul_f(ah, al, b):
    """(ah + al) * b where b is an ordinary float64 value/array."""
    p, e = two_prod(ah, b)
    return fast_two_sum(p, e + al * b)


def dd_div_f(a, bh, bl):
    """a / (bh + bl) for float a (elementwise)."""
    q0 = a / bh
    # residual a - q0*b computed error-free
    p, e = two_prod(q0, bh)
    r = ((a - p) - e) - q0 * bl
    return fast_two_sum(q0, r / bh)


# --- dd natural log via anchor table -------------------------------------
#
# log x = e*log2 + log(anchor_j) + log1p(r), with m = x/2^e in [1,2),
# anchor_j = 1 + j/64 the nearest 1/64 gridpoint and r = (m - a)/a,
# |r| <= 1/128.  Anchor logs are built once from exact rational atanh
# series, so the whole pipeline is self-contained.

_LOG1P_TERMS = 16


def _frac_dd(x: Fraction):
    hi = float(x)
    lo = float(x - Fraction(hi))
    return hi, lo


def _atanh_series(x: Fraction, terms: int) -> Fraction:
    acc = Fraction(0)
    xx = x * x
    p = x
    for k in range(terms):
        acc += p / (2 * k + 1)
        p *= xx
    return acc


def _build_anchor_tables():
    # ln(1 + j/64) = 2 atanh(j / (128 + j)); x <= 1/3 so ~40 terms give <1e-40
    hi = np.empty(65)
    lo = np.empty(65)
    for j in range(65):
        v = 2 * _atanh_series(Fraction(j, 128 + j), 42)
        hi[j], lo[j] = _frac_dd(v)
    inv_hi = np.empty(_LOG1P_TERMS + 1)
    inv_lo = np.empty(_LOG1P_TERMS + 1)
    for k in range(1, _LOG1P_TERMS + 1):
        inv_hi[k], inv_lo[k] = _frac_dd(Fraction((-1) ** (k + 1), k))
    return hi, lo, inv_hi, inv_lo


_ANCHOR_HI, _ANCHOR_LO, _INV_HI, _INV_LO = _build_anchor_tables()


def dd_log(x):
    """Natural log of positive float64 array x as a dd pair (~1e-30 relative)."""
    x = np.asarray(x, dtype=np.float64)
    m, e = np.frexp(x)          # x = m * 2^e, m in [0.5, 1)
    m = m * 2.0
    e = (e - 1).astype(np.float64)
    j = np.rint((m - 1.0) * 64.0)
    a = 1.0 + j / 64.0          # exact in float64
    d = m - a                   # exact: same binade, few significant bits in a
    rh, rl = dd_div_f(d, a, np.zeros_like(a))
    # log1p(r) by series in dd; |r| <= 1/128 so 16 terms reach ~1e-34
    ph, pl = rh, rl
    sh = rh * 0.0
    sl = rh * 0.0
    for k in range(1, _LOG1P_TERMS + 1):
        th, tl = dd_mul(ph, pl, np.full_like(rh, _INV_HI[k]), np.full_like(rh, _INV_LO[k]))
        sh, sl = dd_add(sh, sl, th, tl)
        if k < _LOG1P_TERMS:
            ph, pl = dd_mul(ph, pl, rh, rl)
    ji = j.astype(np.intp)
    sh, sl = dd_add(sh, sl, _ANCHOR_HI[ji], _ANCHOR_LO[ji])
    eh, el = two_prod(e, LN2[0])
    sh, sl = dd_add(sh, sl, eh, el + e * LN2[1])
    return sh, sl


def dd_reduce_2pi(ah, al):
    """Reduce a dd angle modulo 2*pi into [-pi, pi], returned as float64.

    Valid for |k| = |round(a / 2pi)| up to ~2^52; the k*2pi product is
    formed error-free so no accuracy is lost in the reduction itself.
    """
    k = np.rint(ah / TWO_PI[0])
    ph, pe = two_prod(k, TWO_PI[0])
    s, e = two_sum(ah, -ph)
    return s + (e + al - pe - k * TWO_PI[1])

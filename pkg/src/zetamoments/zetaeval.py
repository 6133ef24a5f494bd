"""Point-wise evaluation of zeta on the critical line.

Two independent routes: Euler-Maclaurin summation (reference accuracy,
any height, O(t) work) and the Riemann-Siegel formula for Z(t) (the
workhorse, O(sqrt t) work, C0..C4 remainder corrections).

Phases theta(t) - t log n are assembled in double-double around per-panel
anchors, so Z keeps ~1e-12 absolute phase accuracy at desk heights without
arbitrary precision; see ddmath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np
from scipy.special import bernoulli as _bernoulli_numbers

from . import ddmath as dd
from .specfun import theta_dd, theta_deriv, _theta_loggamma

TWO_PI = 2.0 * math.pi
RS_MIN_T = 30.0
EM_DISPATCH_MAX_T = 30.0

# heuristic envelopes for the RS remainder after K correction terms,
# |R_K| <~ c_K * t^-(2K+3)/4; calibrated against a high-precision oracle
# (see tests), not rigorous for K >= 1
_RS_REM_COEF = {0: 0.16, 1: 0.07, 2: 0.016, 3: 0.04, 4: 0.017}
_PHASE_NOISE_FLOOR = 5e-12

_MAX_MAIN_TERMS = 20_000_000  # refuse main sums beyond desk scale


class QualityMissError(RuntimeError):
    """Requested accuracy cannot be certified; carries the best value found."""

    def __init__(self, message, value=None, quality=None):
        super().__init__(message)
        self.value = value
        self.quality = quality


@dataclass(frozen=True)
class EvalQuality:
    abs_error_bound: float
    method: str  # euler_maclaurin | riemann_siegel | hp_model | ehp_model

    def __post_init__(self):
        if not self.abs_error_bound > 0:
            raise ValueError("abs_error_bound must be positive")


_OFFSET_SPAN = float(2 ** 20)


@dataclass(frozen=True)
class HeightValue:
    """A height t = base + offset with an exact decimal base.

    Same-base subtraction is exact in float64, which keeps zero gaps and
    quadrature abscissas meaningful at heights where t itself cannot be
    stored in a double to the needed absolute precision.
    """

    base: str = "0"
    offset: float = 0.0

    def __post_init__(self):
        b = Decimal(self.base)
        if b < 0:
            raise ValueError("base must be nonnegative")
        if not (0.0 <= self.offset < _OFFSET_SPAN):
            raise ValueError("offset must lie in [0, 2^20)")

    @classmethod
    def from_float(cls, t: float) -> "HeightValue":
        if t < 0:
            raise ValueError("height must be nonnegative")
        b = math.floor(t / _OFFSET_SPAN) * int(_OFFSET_SPAN)
        return cls(str(b), t - b)

    @classmethod
    def from_decimal(cls, value) -> "HeightValue":
        with localcontext() as ctx:
            ctx.prec = 60
            v = Decimal(value)
            span = int(_OFFSET_SPAN)
            b = (v // span) * span
            off = float(v - b)
        return cls(str(b), off)

    def decimal(self) -> Decimal:
        with localcontext() as ctx:
            ctx.prec = 60
            return Decimal(self.base) + Decimal(repr(self.offset))

    def __float__(self) -> float:
        return float(self.decimal())

    def ln(self) -> float:
        """Natural log of the full height, computed in decimal arithmetic."""
        with localcontext() as ctx:
            ctx.prec = 60
            return float(self.decimal().ln())

    def add(self, delta: float) -> "HeightValue":
        off = self.offset + delta
        if 0.0 <= off < _OFFSET_SPAN:
            return HeightValue(self.base, off)
        with localcontext() as ctx:
            ctx.prec = 60
            return HeightValue.from_decimal(self.decimal() + Decimal(repr(delta)))


def _as_base_tau(t) -> tuple[float, float]:
    """Split a height given as float or HeightValue into (base_float, tau)."""
    if isinstance(t, HeightValue):
        b = float(Decimal(t.base))
        return b, t.offset
    t = float(t)
    return 0.0, t


# --- dd log-n table ---------------------------------------------------------

class _LogTable:
    def __init__(self):
        self.hi = np.zeros(1)
        self.lo = np.zeros(1)

    def ensure(self, n: int):
        if n < len(self.hi):
            return
        size = 1 << max(11, (n).bit_length() + 1)
        ns = np.arange(1, size, dtype=np.float64)
        hi, lo = dd.dd_log(ns)
        self.hi = np.concatenate(([0.0], hi))
        self.lo = np.concatenate(([0.0], lo))


_LOGN = _LogTable()


# --- Riemann-Siegel remainder: Psi jets and C0..C4 --------------------------

_JET_ORDER = 40
_PSI_ANCHORS = (0.0, 0.25, 0.5, 0.75, 1.0)
_DERIV_ORDERS = (0, 1, 2, 3, 4, 5, 6, 8, 9, 12)


def _series_exp_quad(B, C, order):
    # Taylor coefficients of exp(i(Bx + Cx^2)) up to x^order
    E = np.zeros(order + 1, dtype=complex)
    E[0] = 1.0
    h1, h2 = 1j * B, 1j * C
    for n in range(1, order + 1):
        s = h1 * E[n - 1]
        if n >= 2:
            s += 2.0 * h2 * E[n - 2]
        E[n] = s / n
    return E


def _cos_quad_series(A, B, C, order):
    return (np.exp(1j * A) * _series_exp_quad(B, C, order)).real


def _series_div(f, g, order):
    q = np.zeros(order + 1)
    for n in range(order + 1):
        s = f[n]
        if n:
            s -= np.dot(g[1:n + 1], q[n - 1::-1])
        q[n] = s / g[0]
    return q


def _psi_jet(p0, order):
    # Psi(p) = cos(2pi(p^2 - p - 1/16)) / cos(2pi p); at p0 = 1/4, 3/4 both
    # parts have exact simple zeros, handled by shifting one series index.
    num = _cos_quad_series(TWO_PI * (p0 * p0 - p0 - 1.0 / 16.0), TWO_PI * (2 * p0 - 1.0), TWO_PI, order + 1)
    den = _cos_quad_series(TWO_PI * p0, TWO_PI, 0.0, order + 1)
    if abs(den[0]) < 1e-9:
        num, den = num[1:], den[1:]
    else:
        num, den = num[:order + 1], den[:order + 1]
    return _series_div(num, den, order)


def _build_psi_tables():
    jets = np.vstack([_psi_jet(a, _JET_ORDER) for a in _PSI_ANCHORS])
    # per derivative order d: coefficient arrays c_n * n!/(n-d)! laid out for Horner
    tables = {}
    for d in _DERIV_ORDERS:
        n = np.arange(_JET_ORDER + 1, dtype=np.float64)
        fall = np.ones(_JET_ORDER + 1)
        for j in range(d):
            fall *= np.clip(n - j, 0.0, None)
        tables[d] = jets * fall[None, :]
    return tables


_PSI_TABLES = _build_psi_tables()
_PI2 = math.pi ** 2

# C_k as linear combinations of Psi derivatives (validated to ~1e-13
# against a high-precision remainder extraction; see tests)
_C_COMBOS = (
    ((0, 1.0),),
    ((3, -1.0 / (96.0 * _PI2)),),
    ((2, 1.0 / (64.0 * _PI2)), (6, 1.0 / (18432.0 * _PI2 ** 2))),
    ((1, -1.0 / (64.0 * _PI2)), (5, -1.0 / (3840.0 * _PI2 ** 2)), (9, -1.0 / (5308416.0 * _PI2 ** 3))),
    ((0, 1.0 / (128.0 * _PI2)), (4, 19.0 / (24576.0 * _PI2 ** 2)),
     (8, 11.0 / (5898240.0 * _PI2 ** 3)), (12, 1.0 / (2038431744.0 * _PI2 ** 4))),
)


def _psi_deriv_many(p, order):
    """Psi^(order) at the points p (array), via the nearest-anchor jet."""
    p = np.asarray(p, dtype=np.float64)
    idx = np.clip(np.rint(p * 4.0).astype(np.intp), 0, 4)
    x = p - 0.25 * idx
    coeff = _PSI_TABLES[order][idx]  # (npts, order+1)
    out = np.zeros_like(p)
    for n in range(_JET_ORDER, order - 1, -1):
        out = out * x + coeff[:, n]
    return out


def _rs_remainder(t, N, p, correction_terms):
    """(-1)^(N-1) (2pi/t)^(1/4) sum_k C_k(p) (2pi/t)^(k/2)."""
    q = TWO_PI / t
    acc = np.zeros_like(p)
    sq = np.sqrt(q)
    for k in range(correction_terms, -1, -1):
        ck = np.zeros_like(p)
        for order, w in _C_COMBOS[k]:
            ck += w * _psi_deriv_many(p, order)
        acc = acc * sq + ck
    sign = np.where(N % 2 == 1, 1.0, -1.0)
    return sign * q ** 0.25 * acc


# --- compensated reductions --------------------------------------------------

def _neumaier_combine(partials):
    """Sequential compensated sum of a list of equal-shape arrays."""
    s = np.zeros_like(partials[0])
    c = np.zeros_like(partials[0])
    for x in partials:
        t = s + x
        c = c + np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
    return s + c


def _neumaier_scalar(values):
    """Compensated sum of a list of floats."""
    s = 0.0
    c = 0.0
    for x in values:
        x = float(x)
        t = s + x
        c += (s - t) + x if abs(s) >= abs(x) else (x - t) + s
        s = t
    return s + c


def _sum_axis1(terms):
    """Deterministic compensated sum along axis 1 (chunked pairwise leaves)."""
    n = terms.shape[1]
    parts = [terms[:, i:i + 128].sum(axis=1) for i in range(0, n, 128)]
    return _neumaier_combine(parts)


# --- panel machinery ---------------------------------------------------------

def _panel_width(b: float) -> float:
    # keep the quintic phase Taylor tail below ~1e-12: w ~ b^(5/6)/64,
    # rounded down to a power of two so anchors stay exact
    w = min(4096.0, max(0.25, b ** (5.0 / 6.0) / 64.0))
    return 2.0 ** math.floor(math.log2(w))


class _PhasePanel:
    """Evaluation context for heights b + x, 0 <= x < width, with dd-accurate
    per-term phase constants."""

    def __init__(self, b: float, nmax: int):
        self.b = b
        self.nmax = nmax
        _LOGN.ensure(nmax + 1)
        lnh = _LOGN.hi[1:nmax + 1]
        lnl = _LOGN.lo[1:nmax + 1]
        th, tl = theta_dd(np.asarray([b]))
        th, tl = float(th[0]), float(tl[0])
        # A_n = theta(b) - b log n  (mod 2pi, kept as dd)
        ph, pe = dd.two_prod(np.full_like(lnh, b), lnh)
        ah, al = dd.dd_add(np.full_like(lnh, th), np.full_like(lnh, tl), -ph, -(pe + b * lnl))
        k = np.rint(ah / dd.TWO_PI[0])
        ph, pe = dd.two_prod(k, dd.TWO_PI[0])
        ah, al = dd.dd_add(ah, al, -ph, -(pe + k * dd.TWO_PI[1]))
        self.A_hi, self.A_lo = ah, al
        # B_n = theta'(b) - log n as dd; theta'(b) to ~1e-26 via dd log
        lbh, lbl = dd.dd_log(np.asarray([b]))
        dph, dpl = dd.dd_add(lbh, lbl, -dd.LN_TWO_PI[0], -dd.LN_TWO_PI[1])
        dph, dpl = 0.5 * dph, 0.5 * dpl
        tp_tail = theta_deriv(b) - 0.5 * math.log(b / TWO_PI)  # curvature tail, tiny
        bh, bl = dd.dd_add(np.full_like(lnh, float(dph[0])), np.full_like(lnh, float(dpl[0]) + tp_tail),
                           -lnh, -lnl)
        self.B_hi, self.B_lo = bh, bl
        # local Taylor of theta beyond the linear term (float64 is ample):
        # theta'' = 1/(2t) + 1/(24 t^3), theta''' = -1/(2t^2) - 1/(8 t^4),
        # theta'''' = 1/t^3, theta''''' = -3/t^4 (+ lower-order tails)
        b2 = b * b
        self.c2 = 0.25 / b + 1.0 / (48.0 * b * b2)
        self.c3 = -1.0 / (12.0 * b2) - 1.0 / (48.0 * b2 * b2)
        self.c4 = 1.0 / (24.0 * b2 * b)
        self.c5 = -1.0 / (40.0 * b2 * b2)
        self.rsqrt = 1.0 / np.sqrt(np.arange(1, nmax + 1, dtype=np.float64))

    def main_sum(self, x, nterms):
        """2 sum_{n<=N} cos(theta(t) - t log n)/sqrt(n) for t = b + x."""
        out = np.empty_like(x)
        cpoly = x * x * (self.c2 + x * (self.c3 + x * (self.c4 + x * self.c5)))
        for i0 in range(0, len(x), 256):
            xs = x[i0:i0 + 256, None]
            cs = cpoly[i0:i0 + 256, None]
            nmax_chunk = int(nterms[i0:i0 + 256].max())
            ah = self.A_hi[None, :nmax_chunk]
            al = self.A_lo[None, :nmax_chunk]
            ph, pe = dd.two_prod(self.B_hi[None, :nmax_chunk], xs)
            pe = pe + self.B_lo[None, :nmax_chunk] * xs
            sh, se = dd.two_sum(ah, ph)
            phase = dd.dd_reduce_2pi(sh, se + al + pe + cs)
            terms = np.cos(phase) * self.rsqrt[None, :nmax_chunk]
            mask = np.arange(1, nmax_chunk + 1)[None, :] <= nterms[i0:i0 + 256, None]
            out[i0:i0 + 256] = _sum_axis1(np.where(mask, terms, 0.0))
        return 2.0 * out


class ZEvaluator:
    """Vectorized Riemann-Siegel Z(t) over a shared exact base height."""

    def __init__(self, base=0.0, correction_terms: int = 2):
        if isinstance(base, str):
            base = float(Decimal(base))
        self.base = float(base)
        if not (0 <= correction_terms <= 4):
            raise ValueError("correction_terms must be in 0..4")
        self.correction_terms = correction_terms
        self._panels: dict[float, _PhasePanel] = {}
        self.eval_count = 0

    def z_many(self, tau: np.ndarray) -> np.ndarray:
        """Z(base + tau) for an array of offsets; all heights must be >= 30."""
        tau = np.asarray(tau, dtype=np.float64)
        t = self.base + tau
        if t.size and t.min() < RS_MIN_T:
            raise ValueError("Riemann-Siegel path requires t >= 30")
        tau_rs = np.sqrt(t / TWO_PI)
        if tau_rs.max() > _MAX_MAIN_TERMS:
            raise ValueError("height too large for direct Riemann-Siegel main sum")
        N = np.floor(tau_rs)
        p = tau_rs - N
        out = np.empty_like(t)
        order = np.argsort(tau, kind="stable")
        wlog = None
        i = 0
        while i < len(order):
            j0 = order[i]
            w = _panel_width(self.base + tau[j0]) if wlog is None else wlog
            anchor = math.floor(tau[j0] / w) * w
            sel = [j0]
            i += 1
            while i < len(order) and tau[order[i]] < anchor + w:
                sel.append(order[i])
                i += 1
            sel = np.asarray(sel)
            b = self.base + anchor
            nmax = int(N[sel].max())
            panel = self._panels.get(b)
            if panel is None or panel.nmax < nmax:
                panel = _PhasePanel(b, max(nmax, 8))
                self._panels[b] = panel
            x = tau[sel] - anchor
            ms = panel.main_sum(x, N[sel])
            out[sel] = ms + _rs_remainder(t[sel], N[sel].astype(np.int64), p[sel], self.correction_terms)
        self.eval_count += len(tau)
        return out

    def abs_zeta_many(self, tau: np.ndarray) -> np.ndarray:
        return np.abs(self.z_many(tau))

    def error_bound(self, t: float) -> float:
        return _RS_REM_COEF[self.correction_terms] * t ** (-(2 * self.correction_terms + 3) / 4.0) \
            + _PHASE_NOISE_FLOOR


def riemann_siegel_Z(t, correction_terms: int = 2):
    """Z(t) with the standard main sum and C0..C_k remainder corrections.

    Returns (value, EvalQuality); |zeta(1/2+it)| = |Z(t)|.
    """
    base, tau = _as_base_tau(t)
    tf = base + tau
    if tf < RS_MIN_T:
        raise ValueError("riemann_siegel_Z requires t >= 30; use Euler-Maclaurin below")
    ev = ZEvaluator(base, correction_terms)
    val = float(ev.z_many(np.asarray([tau]))[0])
    return val, EvalQuality(ev.error_bound(tf), "riemann_siegel")


# --- Euler-Maclaurin ---------------------------------------------------------

_BERNOULLI = _bernoulli_numbers(64)
# B_2k / (2k)! for k = 0..31
_BFACT = np.array([_BERNOULLI[2 * k] / math.factorial(2 * k) for k in range(32)])


def em_min_terms(im_s: float) -> int:
    return int(math.ceil(abs(im_s) / TWO_PI + 10.0))


def zeta_euler_maclaurin(s: complex, terms: int | None = None, bernoulli_order: int = 25):
    """zeta(s) by Euler-Maclaurin with a rigorous first-omitted-term bound.

    Returns (value, EvalQuality).  `terms` is the cut N of the direct sum;
    it must satisfy N >= |Im s|/(2pi) + 10 so the Bernoulli tail is
    decreasing where it is truncated.
    """
    s = complex(s)
    if s == 1:
        raise ValueError("zeta has a pole at s = 1")
    need = em_min_terms(s.imag)
    if terms is None:
        terms = need
    if terms < need:
        raise ValueError(f"insufficient terms: need >= {need} for Im s = {s.imag}")
    if terms > _MAX_MAIN_TERMS:
        raise ValueError("height too large for Euler-Maclaurin at desk scale")
    if not (1 <= bernoulli_order <= 30):
        raise ValueError("bernoulli_order must be in 1..30")
    N = int(terms)
    sigma, t = s.real, s.imag
    # direct sum with dd phases for n^(-it)
    n = np.arange(1, N, dtype=np.float64)
    _LOGN.ensure(N + 1)
    lnh, lnl = _LOGN.hi[1:N], _LOGN.lo[1:N]
    ph, pe = dd.two_prod(np.full_like(lnh, t), lnh)
    phase = dd.dd_reduce_2pi(ph, pe + t * lnl)
    amp = n ** (-sigma)
    re_parts = [np.sum(amp[i:i + 4096] * np.cos(phase[i:i + 4096]))
                for i in range(0, max(N - 1, 1), 4096)]
    im_parts = [np.sum(amp[i:i + 4096] * -np.sin(phase[i:i + 4096]))
                for i in range(0, max(N - 1, 1), 4096)]
    acc = complex(_neumaier_scalar(re_parts), _neumaier_scalar(im_parts))
    Nf = float(N)
    n_pow = Nf ** (-s)          # corrections are small; plain complex pow suffices
    acc += 0.5 * n_pow
    acc += Nf * n_pow / (s - 1.0)
    # Bernoulli tail: T_k = B_2k/(2k)! * N^(1-s-2k) * prod_{j=0}^{2k-2} (s+j)
    rising = s
    q_used = 0
    prev_mag = math.inf
    for k in range(1, bernoulli_order + 1):
        if k > 1:
            rising = rising * (s + (2 * k - 3)) * (s + (2 * k - 2))
        term = _BFACT[k] * rising * n_pow * Nf ** (1 - 2 * k)
        if abs(term) > prev_mag:
            break               # asymptotic series started diverging
        acc += term
        prev_mag = abs(term)
        q_used = k
        if abs(term) < 1e-18 * abs(acc):
            break
    # first omitted term with the standard |(s+2q+1)/(sigma+2q+1)| factor
    k = q_used + 1
    omit_rising = rising * (s + (2 * k - 3)) * (s + (2 * k - 2)) if k > 1 else s
    omitted = _BFACT[k] * omit_rising * n_pow * Nf ** (1 - 2 * k)
    bound = abs(omitted) * abs((s + 2 * q_used + 1)) / abs(sigma + 2 * q_used + 1)
    bound += 1e-16 * (abs(acc) + float(N) ** max(0.0, 1 - sigma)) + 1e-300
    return acc, EvalQuality(float(bound), "euler_maclaurin")


def z_function_em(t: float):
    """Z(t) = e^(i theta) zeta(1/2 + it) via Euler-Maclaurin (reference route).

    Returns (Z, imag_residual, EvalQuality); the residual measures how far
    the rotated value is from being real, a functional-equation consistency
    check.
    """
    val, q = zeta_euler_maclaurin(complex(0.5, t))
    if t < 10:
        th = float(_theta_loggamma(np.asarray(t)))
    else:
        hh, _ = theta_dd(np.asarray([t]))
        th = float(hh[0])
    rot = val * complex(math.cos(th), math.sin(th))
    return float(rot.real), float(abs(rot.imag)), q


def _abs_zeta_em_many(t: np.ndarray) -> np.ndarray:
    """|zeta(1/2+it)| for small heights (t < ~60), vectorized."""
    t = np.asarray(t, dtype=np.float64)
    N = em_min_terms(float(t.max()) if t.size else 0.0)
    n = np.arange(1, N, dtype=np.float64)
    z = np.sum(n[None, :] ** (-0.5) * np.exp(-1j * t[:, None] * np.log(n[None, :])), axis=1)
    s = 0.5 + 1j * t
    Nf = float(N)
    npow = Nf ** (-s)
    z += 0.5 * npow + Nf * npow / (s - 1.0)
    rising = s.copy()
    for k in range(1, 13):
        if k > 1:
            rising = rising * (s + (2 * k - 3)) * (s + (2 * k - 2))
        z += _BFACT[k] * rising * npow * Nf ** (1 - 2 * k)
    return np.abs(z)


# --- dispatcher --------------------------------------------------------------

def abs_zeta_line(t, quality_target: float = 1e-8):
    """|zeta(1/2 + it)| choosing Euler-Maclaurin below t=30, Riemann-Siegel above.

    Returns (value, EvalQuality); raises QualityMissError when the reported
    bound cannot meet `quality_target` (never silently degrades).
    """
    if quality_target <= 0:
        raise ValueError("quality_target must be positive")
    base, tau = _as_base_tau(t)
    tf = base + tau
    if tf <= 0:
        raise ValueError("height must be positive")
    if tf < EM_DISPATCH_MAX_T:
        val, q = zeta_euler_maclaurin(complex(0.5, tf))
        val = abs(val)
    else:
        K = 2
        ev = ZEvaluator(base, K)
        if ev.error_bound(tf) > quality_target:
            K = 4
            ev = ZEvaluator(base, K)
        val = float(ev.abs_zeta_many(np.asarray([tau]))[0])
        q = EvalQuality(ev.error_bound(tf), "riemann_siegel")
    if q.abs_error_bound > quality_target:
        raise QualityMissError(
            f"quality miss: bound {q.abs_error_bound:.3g} > target {quality_target:.3g}",
            value=val, quality=q)
    return val, q

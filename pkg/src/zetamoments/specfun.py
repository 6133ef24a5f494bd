"""Special functions: Riemann-Siegel theta, E1, Ci, Euler's constant,
and the compactly supported smoothing kernel used by the Euler-product
local model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import loggamma, sici

from . import ddmath as dd

EULER_GAMMA = 0.5772156649015329

# asymptotic series tail coefficients of theta: sum c_j / t^(2j+1)
_THETA_TAIL = (1.0 / 48.0, 7.0 / 5760.0, 31.0 / 80640.0, 127.0 / 430080.0)
_THETA_ASYMPTOTIC_MIN = 10.0


def theta_dd(t):
    """theta(t) for t >= 10 as a dd pair (absolute error < 1e-12 up to t ~ 1e12).

    theta(t) = (t/2) log(t/2pi) - t/2 - pi/8 + 1/(48t) + 7/(5760 t^3) + ...
    with the leading terms carried in double-double so the huge linear part
    does not swamp the sub-radian information needed for phases mod 2*pi.
    """
    t = np.asarray(t, dtype=np.float64)
    lh, ll = dd.dd_log(t)
    lh, ll = dd.dd_add(lh, ll, -dd.LN_TWO_PI[0], -dd.LN_TWO_PI[1])
    half_t = 0.5 * t
    sh, sl = dd.dd_mul_f(lh, ll, half_t)
    sh, sl = dd.dd_add(sh, sl, -half_t, np.zeros_like(t))
    sh, sl = dd.dd_add(sh, sl, np.full_like(t, -dd.PI_8[0]), np.full_like(t, -dd.PI_8[1]))
    inv2 = 1.0 / (t * t)
    tail = _THETA_TAIL[3]
    for c in (_THETA_TAIL[2], _THETA_TAIL[1], _THETA_TAIL[0]):
        tail = tail * inv2 + c
    return dd.dd_add_f(sh, sl, tail / t)


def _theta_loggamma(t):
    # definition theta(t) = arg Gamma(1/4 + it/2) - (t/2) log pi, any t > 0
    t = np.asarray(t, dtype=np.float64)
    return loggamma(0.25 + 0.5j * t).imag - 0.5 * t * math.log(math.pi)


def theta(t):
    """Riemann-Siegel theta.  Asymptotic series for t >= 10, log-gamma below.

    Accepts floats, arrays, or split heights (objects with base/offset,
    base below 2^53); split heights keep full absolute accuracy at large t.
    """
    if hasattr(t, "base") and hasattr(t, "offset"):
        from decimal import Decimal
        b = float(Decimal(t.base))
        if b != int(b) or b > 2.0 ** 53:
            raise ValueError("split theta needs an exact integer base <= 2^53")
        full = b + t.offset
        if full < _THETA_ASYMPTOTIC_MIN:
            return float(_theta_loggamma(np.asarray(full)))
        anchor = max(math.floor(b + math.floor(t.offset)), int(_THETA_ASYMPTOTIC_MIN))
        hh, _ = theta_split_dd(np.asarray([float(anchor)]),
                               np.asarray([(b - anchor) + t.offset]))
        return float(hh[0])
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise ValueError("theta requires t > 0")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    hi = t >= _THETA_ASYMPTOTIC_MIN
    if np.any(hi):
        out[hi] = theta_dd(t[hi])[0]
    if np.any(~hi):
        out[~hi] = _theta_loggamma(t[~hi])
    return float(out[0]) if scalar else out


def theta_deriv(t):
    """theta'(t) = (1/2) log(t/2pi) - 1/(48 t^2) - 21/(5760 t^4) - ..."""
    t = np.asarray(t, dtype=np.float64)
    inv2 = 1.0 / (t * t)
    tail = -7.0 * inv2 * inv2 * (3.0 / 5760.0 + inv2 * (31.0 * 5.0 / (7.0 * 80640.0)))
    return 0.5 * np.log(t / (2.0 * math.pi)) - inv2 / 48.0 + tail


def theta_split_dd(b, x):
    """theta(b + x) as a dd pair for exact float b >= 10 and |x| <= ~1.

    Splitting the height keeps the result meaningful modulo pi even when
    theta itself is ~1e13: the base part is dd-exact and the offset enters
    through a short, well-conditioned local Taylor series.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    th, tl = theta_dd(b)
    # theta'(b) in dd
    lh, ll = dd.dd_log(b)
    lh, ll = dd.dd_add(lh, ll, -dd.LN_TWO_PI[0], -dd.LN_TWO_PI[1])
    dh, dl = 0.5 * lh, 0.5 * ll
    dl = dl + (theta_deriv(b) - 0.5 * np.log(b / (2.0 * math.pi)))  # curvature tail
    ph, pe = dd.two_prod(dh, x)
    th, tl = dd.dd_add(th, tl, ph, pe + dl * x)
    b2 = b * b
    c2 = 0.25 / b + 1.0 / (48.0 * b * b2)
    c3 = -1.0 / (12.0 * b2)
    c4 = 1.0 / (24.0 * b2 * b)
    poly = x * x * (c2 + x * (c3 + x * c4))
    return dd.dd_add_f(th, tl, poly)


def euler_gamma() -> float:
    """Euler's constant gamma."""
    return EULER_GAMMA


# --- exponential integral E1 ----------------------------------------------

_E1_SERIES_RADIUS = 4.0


def _e1_series(z):
    # E1(z) = -gamma - log z + sum_{k>=1} (-1)^(k+1) z^k / (k k!)
    acc = 0.0 + 0.0j
    term = 1.0 + 0.0j
    for k in range(1, 80):
        term *= z / k
        piece = term / k if (k % 2 == 1) else -term / k
        acc += piece
        if abs(piece) < 1e-18 * max(abs(acc), 1e-30):
            break
    return -EULER_GAMMA - np.log(z) + acc


def _e1_contfrac(z):
    # modified Lentz for E1(z) = e^-z / (z + 1/(1 + 1/(z + 2/(1 + 2/(z + ...)))))
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0 + 0.0j
    b = z
    a = 1.0 + 0.0j
    # first convergent: b0 = z
    f = b if b != 0 else tiny
    c = f
    d = 0.0
    n = 0
    for i in range(1, 400):
        if i % 2 == 1:
            a = (i + 1) // 2   # 1, 1, 2, 2, 3, 3, ...
            b = 1.0
        else:
            a = i // 2
            b = z
        d = b + a * d
        if d == 0:
            d = tiny
        c = b + a / c
        if c == 0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return np.exp(-z) / f


def expint_e1(z: complex) -> complex:
    """E1(z) = integral_z^inf e^-w / w dw for Re z >= 0 or pure imaginary z.

    Power series inside |z| <= 4, continued fraction beyond; relative
    error below 1e-12 on the supported domain.
    """
    z = complex(z)
    if z == 0:
        raise ValueError("E1 has a logarithmic singularity at z = 0")
    if z.real < 0 and z.imag != 0:
        raise ValueError("E1 implemented for Re(z) >= 0 (or the imaginary axis)")
    if abs(z) <= _E1_SERIES_RADIUS:
        return complex(_e1_series(z))
    return complex(_e1_contfrac(z))


def cosine_integral(x):
    """Standard cosine integral Ci(x) = gamma + log x + int_0^x (cos u - 1)/u du.

    Note Ci(x) = -int_x^inf cos(u)/u du; the Euler-product model needs the
    convention for which exp(sum Ci(|t - gamma_j| log X)) vanishes as t
    approaches a zero, which is this standard one.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("cosine_integral requires x > 0")
    ci = sici(x)[1]
    return float(ci) if ci.ndim == 0 else ci


# --- EHP smoothing kernel --------------------------------------------------

_E = math.e


def _bump(y):
    # f(y) = exp(-1/y^2) for y > 0 else 0
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    pos = y > 0
    out[pos] = np.exp(-1.0 / (y[pos] * y[pos]))
    return out


@dataclass(frozen=True)
class SmoothingKernel:
    """Mass-one kernel u(x) = X g(X log(x/e) + 1)/x supported on [e^(1-1/X), e].

    g is the normalized bump f(y) f(1-y) / int_0^1 f f(1-.), built from
    f(y) = exp(-1/y^2).  v(t) = int_t^inf u is evaluated with fixed
    Gauss-Legendre panels (the model output is insensitive to the exact
    kernel shape, so 64 nodes are ample).
    """

    X: float
    quad_nodes: int = 64
    _norm: float = field(init=False, repr=False, default=0.0)
    _gl_x: np.ndarray = field(init=False, repr=False, default=None)
    _gl_w: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if not (self.X >= 2.0):
            raise ValueError("kernel cutoff X must be >= 2")
        if self.quad_nodes < 4:
            raise ValueError("quad_nodes must be >= 4")
        x, w = np.polynomial.legendre.leggauss(self.quad_nodes)
        object.__setattr__(self, "_gl_x", x)
        object.__setattr__(self, "_gl_w", w)
        # normalization of g on [0, 1]
        y = 0.5 * (x + 1.0)
        norm = float(np.sum(0.5 * w * _bump(y) * _bump(1.0 - y)))
        object.__setattr__(self, "_norm", norm)

    @property
    def support(self):
        return (math.exp(1.0 - 1.0 / self.X), _E)

    def _g(self, y):
        return _bump(y) * _bump(1.0 - y) / self._norm

    def u(self, x):
        """Kernel value u(x); zero outside [e^(1-1/X), e]."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(x <= 0):
            raise ValueError("kernel_u requires x > 0")
        y = self.X * np.log(x / _E) + 1.0
        out = np.where((y > 0) & (y < 1), self.X * self._g(np.clip(y, 1e-300, None)) / x, 0.0)
        return float(out) if out.ndim == 0 else out

    def v(self, t):
        """v(t) = int_t^inf u(x) dx, clamped to [0, 1]; 1 left of the support."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t <= 0):
            raise ValueError("kernel_v requires t > 0")
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        y0 = np.clip(self.X * np.log(t / _E) + 1.0, 0.0, 1.0)
        # integrate g over [y0, 1] with scaled GL nodes
        half = 0.5 * (1.0 - y0)
        mid = 0.5 * (1.0 + y0)
        nodes = mid[:, None] + half[:, None] * self._gl_x[None, :]
        vals = self._g(nodes)
        out = np.clip(np.sum(vals * self._gl_w[None, :], axis=1) * half, 0.0, 1.0)
        return float(out[0]) if scalar else out


def kernel_u(x, cfg: SmoothingKernel):
    return cfg.u(x)


def kernel_v(t, cfg: SmoothingKernel):
    return cfg.v(t)

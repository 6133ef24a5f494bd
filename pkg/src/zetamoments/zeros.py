"""Zero isolation and management: Gram points, sign-change scans with
count verification against the theta/pi + 1 + S backbone, refinement,
block construction, and the zero file format.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, localcontext

import numpy as np
from scipy.special import lambertw

from . import ddmath as dd
from .specfun import theta_dd, theta_deriv, theta_split_dd, _theta_loggamma
from .zetaeval import (EM_DISPATCH_MAX_T, HeightValue, ZEvaluator,
                       _abs_zeta_em_many, _BFACT, em_min_terms)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MIN_ISOLATION_T = 10.0
GRAM_NEWTON_CAP = 64
GRAM_RESIDUAL_TOL = 1e-10
MAX_BLOCK_REFINE = 256        # 64x the initial 4-point grid
ANCHOR_WINDOW = 8
ANCHOR_MIN_Z = 0.05


class MissingZeroError(RuntimeError):
    """Zero count cannot be reconciled after maximal grid refinement."""


class GramConvergenceError(RuntimeError):
    """Newton iteration for a Gram point failed to converge."""


def refine_tolerance(t: float) -> float:
    return 1e-9 * max(1.0, t / 1e6)


def mean_spacing(t) -> float:
    """Average gap between consecutive zeros near height t: 2pi/log(t/2pi)."""
    t = np.asarray(t, dtype=np.float64)
    out = TWO_PI / np.log(t / TWO_PI)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ZeroList:
    """Ordered zero ordinates as offsets from an exact decimal base."""

    base: str
    offsets: np.ndarray
    first_index: int | None = None
    gaps: tuple[int, ...] = ()   # offsets[i-1] -> offsets[i] spans a recorded gap

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.float64)
        object.__setattr__(self, "offsets", off)
        if len(off) > 1 and not np.all(np.diff(off) > 0):
            raise ValueError("zero ordinates must be strictly increasing")
        Decimal(self.base)

    def __len__(self):
        return len(self.offsets)

    @property
    def base_float(self) -> float:
        return float(Decimal(self.base))

    def height(self, i: int) -> HeightValue:
        with localcontext() as ctx:
            ctx.prec = 60
            return HeightValue.from_decimal(Decimal(self.base) + Decimal(repr(float(self.offsets[i]))))

    def index_of(self, global_index: int) -> int:
        if self.first_index is None:
            raise ValueError("zero list has no anchored first_index")
        i = global_index - self.first_index
        if not (0 <= i < len(self)):
            raise IndexError(f"zero #{global_index} not in list")
        return i

    def slice(self, lo: int, hi: int) -> "ZeroList":
        """Sub-list by local indices [lo, hi)."""
        gaps = tuple(g - lo for g in self.gaps if lo < g < hi)
        fi = None if self.first_index is None else self.first_index + lo
        return ZeroList(self.base, self.offsets[lo:hi].copy(), fi, gaps)


@dataclass(frozen=True)
class ZeroBlock:
    """A run of consecutive zeros; the last zero of one block is the first
    of the next."""

    start: int            # local index of first zero
    count: int            # number of zeros spanned (>= 2)
    alpha: float          # offset of first zero
    beta: float           # offset of last zero

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("a block needs at least 2 zeros")
        if not self.beta > self.alpha:
            raise ValueError("block interval must have positive length")

    @property
    def length(self) -> float:
        return self.beta - self.alpha


# --- Gram points -------------------------------------------------------------

def _theta_minus_npi(t, n):
    hh, ll = theta_dd(t)
    ph, pe = dd.two_prod(n, dd.PI[0])
    hh, ll = dd.dd_add(hh, ll, -ph, -(pe + n * dd.PI[1]))
    return hh + ll


def gram_points(ns) -> np.ndarray:
    """Heights g_n with theta(g_n) = n pi, vectorized Newton iteration.

    Residuals converge to the float64 representation limit of g_n itself
    (~ulp(t) * theta'(t)); gram_point() polishes further in split form.
    """
    ns = np.atleast_1d(np.asarray(ns, dtype=np.float64))
    if np.any(ns < -1):
        raise ValueError("gram points defined for n >= -1")
    t = np.empty_like(ns)
    small = ns < 1
    t[small] = 10.0 + 4.0 * (ns[small] + 1.0)   # seeds for n = -1, 0
    big = ~small
    if np.any(big):
        x = (ns[big] + 0.125) / math.e
        w = lambertw(x).real
        t[big] = np.maximum(TWO_PI * math.e * x / np.maximum(w, 1e-12), 18.0)
    res = _theta_minus_npi(t, ns)
    for _ in range(GRAM_NEWTON_CAP):
        tol = np.maximum(GRAM_RESIDUAL_TOL, 4.0 * np.finfo(float).eps * t * theta_deriv(t))
        if np.all(np.abs(res) < tol):
            break
        t = t - res / theta_deriv(t)
        res = _theta_minus_npi(t, ns)
    else:
        raise GramConvergenceError("gram point Newton iteration did not converge")
    return t


def gram_point(n: int) -> HeightValue:
    """The Gram point g_n as a split height, polished so that the residual
    |theta(g_n) - n pi| is below 1e-10 (beyond what a single float64 can
    represent at large heights)."""
    t = float(gram_points([n])[0])
    if t < 10.5:
        return HeightValue.from_float(t)
    b = float(math.floor(t))
    x = t - b
    nf = float(n)
    for _ in range(GRAM_NEWTON_CAP):
        hh, ll = theta_split_dd(np.asarray([b]), np.asarray([x]))
        ph, pe = dd.two_prod(np.asarray([nf]), dd.PI[0])
        rh, rl = dd.dd_add(hh, ll, -ph, -(pe + nf * dd.PI[1]))
        res = float(rh[0] + rl[0])
        if abs(res) < GRAM_RESIDUAL_TOL:
            break
        x -= res / float(theta_deriv(b + x))
    else:
        raise GramConvergenceError(f"gram point polish did not converge for n={n}")
    if not (0.0 <= x < 2.0):
        b += math.floor(x)
        x -= math.floor(x)
    return HeightValue(str(int(b)), x)


def zero_count_backbone(t) -> float:
    """theta(t)/pi + 1, the smooth part of the zero counting function N(t)."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < MIN_ISOLATION_T):
        th = _theta_loggamma(t)
    else:
        th = theta_dd(t)[0]
    out = th / math.pi + 1.0
    return float(out) if out.ndim == 0 else out


# --- Z sign evaluation across the EM/RS split --------------------------------

def _z_em_many(t: np.ndarray) -> np.ndarray:
    """Z(t) for t below the Riemann-Siegel domain, via complex EM + rotation."""
    t = np.asarray(t, dtype=np.float64)
    N = em_min_terms(float(t.max()) if t.size else 0.0)
    n = np.arange(1, N, dtype=np.float64)
    s = 0.5 + 1j * t
    z = np.sum(n[None, :] ** (-s[:, None]), axis=1)
    Nf = float(N)
    npow = Nf ** (-s)
    z += 0.5 * npow + Nf * npow / (s - 1.0)
    rising = s.copy()
    for k in range(1, 13):
        if k > 1:
            rising = rising * (s + (2 * k - 3)) * (s + (2 * k - 2))
        z += _BFACT[k] * rising * npow * Nf ** (1 - 2 * k)
    th = _theta_loggamma(t)
    return (z * np.exp(1j * th)).real


class ZGrid:
    """Z evaluation over base + tau handling the EM/RS domain split."""

    def __init__(self, base: float, correction_terms: int = 2):
        self.base = float(base)
        self.ev = ZEvaluator(self.base, correction_terms)

    def z(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=np.float64)
        t = self.base + tau
        out = np.empty_like(tau)
        low = t < EM_DISPATCH_MAX_T
        if np.any(low):
            out[low] = _z_em_many(t[low])
            self.ev.eval_count += int(np.count_nonzero(low))
        if np.any(~low):
            out[~low] = self.ev.z_many(tau[~low])
        return out


# --- isolation ---------------------------------------------------------------

def _block_grid(g_off: np.ndarray, n_pts: int) -> np.ndarray:
    """Grid of n_pts points per Gram block [g_i, g_i+1), plus the final endpoint."""
    frac = np.arange(n_pts, dtype=np.float64) / n_pts
    pts = g_off[:-1, None] + np.diff(g_off)[:, None] * frac[None, :]
    return np.concatenate([pts.ravel(), g_off[-1:]])


def _brackets_from_grid(pts: np.ndarray, z: np.ndarray):
    s = np.sign(z)
    # treat exact zeros as positive to avoid double counting
    s[s == 0] = 1.0
    flips = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return pts[flips], pts[flips + 1], z[flips], z[flips + 1]


def _refine_brackets(zgrid: ZGrid, lo, hi, flo, fhi, tol: float):
    """Vectorized Illinois (modified regula falsi) with bisection safeguards."""
    lo = lo.copy(); hi = hi.copy(); flo = flo.copy(); fhi = fhi.copy()
    for _ in range(80):
        width = hi - lo
        active = width > tol
        if not np.any(active):
            break
        x = np.where(active, (lo * fhi - hi * flo) / (fhi - flo), lo)
        # keep strictly inside; fall back to midpoint when degenerate
        mid_ok = (x > lo) & (x < hi)
        x = np.where(mid_ok, x, 0.5 * (lo + hi))
        fx = np.empty_like(x)
        fx[active] = zgrid.z(x[active])
        fx[~active] = 0.0
        same_side = (fx * flo > 0)
        took_lo = active & same_side
        took_hi = active & ~same_side
        # Illinois halving of the retained endpoint's value
        fhi = np.where(took_lo, fhi * 0.5, fhi)
        flo = np.where(took_hi, flo * 0.5, flo)
        lo = np.where(took_lo, x, lo)
        flo = np.where(took_lo, fx, flo)
        hi = np.where(took_hi, x, hi)
        fhi = np.where(took_hi, fx, fhi)
    return 0.5 * (lo + hi)


def _scan_chunk(base: float, g_off: np.ndarray, density: int, correction_terms: int):
    zg = ZGrid(base, correction_terms)
    pts = _block_grid(g_off, density)
    z = zg.z(pts)
    # per-block sign change counts (density pts per block)
    s = np.sign(z)
    s[s == 0] = 1.0
    flips = s[:-1] * s[1:] < 0
    nblocks = len(g_off) - 1
    counts = np.add.reduceat(flips.astype(np.int64), np.arange(0, nblocks * density, density))
    return pts, z, counts, zg


def _isolate_chunk(args):
    base, g_off, correction_terms = args
    zg = None
    density = 4
    pts, z, counts, zg = _scan_chunk(base, g_off, density, correction_terms)
    # refine deficient neighborhoods until each block's count stabilizes
    # against the expected one-zero-per-block pattern
    while density < MAX_BLOCK_REFINE:
        deficient = np.nonzero(counts == 0)[0]
        if len(deficient) == 0:
            break
        density *= 2
        sel = np.unique(np.concatenate([deficient - 1, deficient, deficient + 1]))
        sel = sel[(sel >= 0) & (sel < len(counts))]
        sub_pts = _block_grid_multi(g_off, sel, density)
        sub_z = zg.z(sub_pts.ravel()).reshape(sub_pts.shape)
        ss = np.sign(sub_z)
        ss[ss == 0] = 1.0
        sub_counts = np.sum(ss[:, :-1] * ss[:, 1:] < 0, axis=1)
        improved = sub_counts > counts[sel]
        if not np.any(improved):
            # no block improved at this density; keep doubling until cap
            continue
        # merge improved blocks into the master grid representation
        counts[sel] = np.maximum(counts[sel], sub_counts)
        pts, z = _merge_grids(pts, z, sub_pts[improved], sub_z[improved])
    lo, hi, flo, fhi = _brackets_from_grid(pts, z)
    zeros = _refine_brackets(zg, lo, hi, flo, fhi, refine_tolerance(base + float(g_off[0])))
    gram_z = z[np.searchsorted(pts, g_off)]
    return zeros, counts, gram_z, zg.ev.eval_count


def _block_grid_multi(g_off, block_idx, n_pts):
    frac = np.arange(n_pts + 1, dtype=np.float64) / n_pts
    a = g_off[block_idx][:, None]
    b = g_off[block_idx + 1][:, None]
    return a + (b - a) * frac[None, :]


def _merge_grids(pts, z, sub_pts, sub_z):
    allp = np.concatenate([pts, sub_pts.ravel()])
    allz = np.concatenate([z, sub_z.ravel()])
    order = np.argsort(allp, kind="stable")
    allp = allp[order]
    allz = allz[order]
    keep = np.concatenate([[True], np.diff(allp) > 0])
    return allp[keep], allz[keep]


_CHUNK_BLOCKS = 2048


def isolate_zeros(t_lo: float, t_hi: float, expected_count: int | None = None,
                  workers: int = 1, correction_terms: int = 2) -> ZeroList:
    """All zeros of Z in [t_lo, t_hi], refined and count-verified.

    Sign changes are collected on a Gram-point-seeded grid, subdividing
    Gram blocks that hold fewer sign changes than Gram's law suggests (up
    to 64x).  The total is checked against theta/pi + 1 + S via strong
    Gram windows at both ends where S = 0; a surviving mismatch raises
    MissingZeroError naming the suspect Gram block.
    """
    if t_lo < MIN_ISOLATION_T:
        raise ValueError(f"isolation supported for t >= {MIN_ISOLATION_T}")
    if t_hi <= t_lo:
        raise ValueError("empty range")
    # gram index range with anchoring margin
    n_lo = max(-1, int(math.floor(zero_count_backbone(t_lo) - 1.0)) - ANCHOR_WINDOW - 2)
    n_hi = int(math.ceil(zero_count_backbone(t_hi) - 1.0)) + ANCHOR_WINDOW + 2
    g = gram_points(np.arange(n_lo, n_hi + 1))
    base = math.floor(g[0] / 2 ** 20) * 2 ** 20
    g_off = g - base
    nblocks = len(g) - 1

    chunk_bounds = list(range(0, nblocks, _CHUNK_BLOCKS)) + [nblocks]
    jobs = [(float(base), g_off[a:b + 1], correction_terms)
            for a, b in zip(chunk_bounds[:-1], chunk_bounds[1:])]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_isolate_chunk, jobs))
    else:
        results = [_isolate_chunk(j) for j in jobs]
    zeros = np.concatenate([r[0] for r in results])
    counts = np.concatenate([r[1] for r in results])
    gram_z = np.concatenate([r[2][:-1] for r in results] + [[results[-1][2][-1]]])

    # strong Gram windows: ANCHOR_WINDOW consecutive blocks, one change each,
    # healthy alternating Z at the window's gram points
    ns = np.arange(n_lo, n_hi + 1)
    alt_ok = ((-1.0) ** ns) * gram_z > ANCHOR_MIN_Z
    ok = (counts == 1) & alt_ok[:-1] & alt_ok[1:]
    win = np.convolve(ok.astype(int), np.ones(ANCHOR_WINDOW, dtype=int), mode="valid")
    strong = np.nonzero(win == ANCHOR_WINDOW)[0]
    if len(strong) == 0:
        raise MissingZeroError("no strong Gram window found to anchor the count")
    left_anchor = strong[0]                      # block index into counts
    right_anchor = strong[-1] + ANCHOR_WINDOW    # grid line index (block end)
    expected = right_anchor - left_anchor        # zeros in [g_la, g_ra)

    g_la = g_off[left_anchor]
    g_ra = g_off[right_anchor]
    inner = (zeros >= g_la) & (zeros < g_ra)
    found = int(np.count_nonzero(inner))
    if found != expected:
        # final targeted refinement at maximal density over suspect blocks
        zg = ZGrid(base, correction_terms)
        bad = np.nonzero(counts[left_anchor:right_anchor] != 1)[0] + left_anchor
        sel = np.unique(np.clip(np.concatenate([bad - 1, bad, bad + 1]), 0, nblocks - 1))
        if len(sel):
            sub = _block_grid_multi(g_off, sel, MAX_BLOCK_REFINE)
            subz = zg.z(sub.ravel()).reshape(sub.shape)
            lo, hi, flo, fhi = [], [], [], []
            for row_p, row_z in zip(sub, subz):
                a, b, fa, fb = _brackets_from_grid(row_p, row_z)
                lo.append(a); hi.append(b); flo.append(fa); fhi.append(fb)
            lo = np.concatenate(lo); hi = np.concatenate(hi)
            flo = np.concatenate(flo); fhi = np.concatenate(fhi)
            extra = _refine_brackets(zg, lo, hi, flo, fhi, refine_tolerance(base + float(g_off[0])))
            merged = np.unique(np.concatenate([zeros, extra]))
            # dedupe zeros that were found twice (within tolerance)
            tol = 10 * refine_tolerance(base + float(g_off[-1]))
            keep = np.concatenate([[True], np.diff(merged) > tol])
            zeros = merged[keep]
            inner = (zeros >= g_la) & (zeros < g_ra)
            found = int(np.count_nonzero(inner))
    if found != expected:
        dev = np.nonzero(counts[left_anchor:right_anchor] == 0)[0]
        suspect = (n_lo + left_anchor + int(dev[0])) if len(dev) else n_lo + left_anchor
        raise MissingZeroError(
            f"found {found} zeros between gram points, backbone expects {expected}; "
            f"suspect gram block starting at g_{suspect}")

    # first zero above g_la has global index (left_anchor gram n) + 2
    first_inner_global = (n_lo + left_anchor) + 2
    zs = np.sort(zeros[inner])
    sel = (zs >= t_lo - base) & (zs <= t_hi - base)
    out = zs[sel]
    first_index = first_inner_global + int(np.searchsorted(zs, t_lo - base))
    if expected_count is not None and len(out) != expected_count:
        raise MissingZeroError(f"expected {expected_count} zeros, found {len(out)}")
    return ZeroList(str(int(base)), out, first_index)


def isolate_zeros_by_index(i_lo: int, i_hi: int, workers: int = 1,
                           pad: int = 0) -> ZeroList:
    """Zeros number i_lo..i_hi inclusive (1-based global indices), optionally
    padded by `pad` extra zeros on each side (for local-model windows)."""
    if i_lo < 1 or i_hi < i_lo:
        raise ValueError("bad index range")
    lo, hi = i_lo - pad, i_hi + pad
    g_lo = float(gram_points([max(-1, lo - 30)])[0]) if lo > 1 else MIN_ISOLATION_T
    g_hi = float(gram_points([hi + 30])[0])
    zl = isolate_zeros(max(MIN_ISOLATION_T, g_lo), g_hi, workers=workers)
    a = zl.index_of(max(lo, zl.first_index))
    b = zl.index_of(hi) + 1
    if zl.first_index > lo:
        raise MissingZeroError("isolation window does not cover requested indices")
    return zl.slice(a, b)


# --- blocks -------------------------------------------------------------------

def build_blocks(zeros: ZeroList, block_size: int) -> list[ZeroBlock]:
    """Consecutive shared-endpoint blocks of `block_size` zeros; runs
    delimited by recorded gaps; the trailing partial block is dropped."""
    if block_size < 2:
        raise ValueError("block_size must be >= 2")
    if len(zeros) < block_size:
        raise ValueError("not enough zeros for one block")
    blocks: list[ZeroBlock] = []
    run_edges = [0] + [g for g in zeros.gaps] + [len(zeros)]
    dropped = 0
    for a, b in zip(run_edges[:-1], run_edges[1:]):
        i = a
        while i + block_size <= b:
            blocks.append(ZeroBlock(i, block_size, float(zeros.offsets[i]),
                                    float(zeros.offsets[i + block_size - 1])))
            i += block_size - 1   # shared endpoint
        dropped += b - i - 1 if b - i > 1 else 0
    if dropped:
        logger.info("build_blocks: dropped %d trailing zeros not filling a block", dropped)
    return blocks


# --- zero file format ---------------------------------------------------------

_ZFILE_MAGIC = "ZETAZEROS v1"


def write_zero_file(zeros: ZeroList, path):
    """Text format: header lines, one 18-significant-digit offset per line,
    then a sha256 of the payload lines."""
    lines = [f"{o:.17e}" for o in zeros.offsets]
    payload = "".join(ln + "\n" for ln in lines)
    digest = hashlib.sha256(payload.encode()).hexdigest()
    fi = "unknown" if zeros.first_index is None else str(zeros.first_index)
    with open(path, "w") as f:
        f.write(f"{_ZFILE_MAGIC}\n")
        f.write(f"base={zeros.base}\n")
        f.write(f"first_index={fi}\n")
        f.write(f"count={len(zeros)}\n")
        f.write(payload)
        f.write(f"sha256={digest}\n")


def read_zero_file(path) -> ZeroList:
    """Read and validate a zero file; large spacings are recorded as gaps."""
    with open(path) as f:
        if f.readline().rstrip("\n") != _ZFILE_MAGIC:
            raise ValueError("malformed header: bad magic")
        base_line = f.readline().rstrip("\n")
        fi_line = f.readline().rstrip("\n")
        count_line = f.readline().rstrip("\n")
        if not (base_line.startswith("base=") and fi_line.startswith("first_index=")
                and count_line.startswith("count=")):
            raise ValueError("malformed header")
        base = base_line[5:]
        fi_txt = fi_line[12:]
        first_index = None if fi_txt == "unknown" else int(fi_txt)
        count = int(count_line[6:])
        lines = [f.readline().rstrip("\n") for _ in range(count)]
        sha_line = f.readline().rstrip("\n")
    if not sha_line.startswith("sha256="):
        raise ValueError("missing checksum line")
    payload = "".join(ln + "\n" for ln in lines)
    if hashlib.sha256(payload.encode()).hexdigest() != sha_line[7:]:
        raise ValueError("checksum mismatch")
    offsets = np.array([float(ln) for ln in lines])
    if len(offsets) > 1 and not np.all(np.diff(offsets) > 0):
        raise ValueError("non-monotone ordinates")
    # gap detection against 10x local mean spacing
    gaps = ()
    if len(offsets) > 1:
        t_local = float(Decimal(base)) + offsets[:-1] if float(Decimal(base)) > 0 else np.maximum(offsets[:-1], 15.0)
        limit = 10.0 * mean_spacing(np.maximum(t_local, 15.0))
        gaps = tuple(int(i) + 1 for i in np.nonzero(np.diff(offsets) > limit)[0])
        if gaps:
            logger.warning("zero file %s has %d recorded gaps", path, len(gaps))
    return ZeroList(base, offsets, first_index, gaps)

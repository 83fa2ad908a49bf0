"""Adaptive Gauss-Kronrod quadrature, including a log-domain front end.

``integrate`` is a global adaptive G7/K15 scheme in the QUADPACK style.
``log_integrate`` handles integrands known only through ``log|f|`` (and a
sign): it locates the bulk of the integrand, factors out its maximum and
returns the result as a :class:`LogValue`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .gaussian import log_complement, std_normal_logpdf
from .logvalue import LogValue

__all__ = [
    "QuadratureConfig",
    "QuadratureError",
    "ToleranceNotMet",
    "NonFiniteIntegrand",
    "QuadResult",
    "integrate",
    "log_integrate",
    "integrate_gauss",
    "DEFAULT_CONFIG",
]


class QuadratureError(ArithmeticError):
    pass


class ToleranceNotMet(QuadratureError):
    def __init__(self, msg: str, partial: "QuadResult" = None):
        super().__init__(msg)
        self.partial = partial


class NonFiniteIntegrand(QuadratureError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    n_intervals: int


# 15-point Kronrod nodes on [-1, 1] with embedded 7-point Gauss rule.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])           # 15 nodes, ascending
_WK_FULL = np.concatenate([_WK[:-1], _WK[::-1]])
_WG_FULL = np.zeros(15)
_WG_FULL[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a: float, b: float):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _NODES
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    if not np.all(np.isfinite(y)):
        raise NonFiniteIntegrand(f"non-finite integrand sample on [{a}, {b}]")
    k = half * float(_WK_FULL @ y)
    g = half * float(_WG_FULL @ y)
    # QUADPACK-style error scaling
    resasc = half * float(_WK_FULL @ np.abs(y - k / (2 * half))) if half != 0 else 0.0
    err = abs(k - g)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    resabs = half * float(_WK_FULL @ np.abs(y))
    if resabs > np.finfo(float).tiny / (50 * np.finfo(float).eps):
        err = max(50 * np.finfo(float).eps * resabs, err)
    return k, err


def integrate(f: Callable, a: float, b: float, cfg: QuadratureConfig = DEFAULT_CONFIG,
              breakpoints: Iterable[float] = ()) -> QuadResult:
    """Globally adaptive G7/K15 quadrature of a vectorised ``f`` on finite [a, b]."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integrate() needs finite limits; use log_integrate or integrate_gauss")
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    flip = 1.0
    if a > b:
        a, b, flip = b, a, -1.0
    pts = sorted({a, b, *[float(p) for p in breakpoints if a < p < b]})
    heap = []
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, err = _gk15(f, lo, hi)
        total += val
        total_err += err
        heapq.heappush(heap, (-err, lo, hi, val))
    n = len(heap)
    while total_err > max(cfg.abs_tol, cfg.rel_tol * abs(total)):
        if n >= cfg.max_subdivisions:
            partial = QuadResult(flip * math.fsum(item[3] for item in heap), total_err, n)
            raise ToleranceNotMet(
                f"quadrature on [{a}, {b}] stopped at {n} intervals with error {total_err:.3e}", partial)
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            # interval exhausted at machine resolution; accept what we have
            heapq.heappush(heap, (0.0, lo, hi, val))
            total_err += neg_err
            continue
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n += 1
    # recompute the sum to shed accumulated rounding from the running total
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    return QuadResult(flip * total, total_err, n)


# log-domain front end ---------------------------------------------------------

_DROP = 80.0   # integrand below max * e^-80 is ignored (relative 1.8e-35)


def _eval_log(logf, x):
    out = logf(x)
    if isinstance(out, tuple):
        la, sg = out
        return np.asarray(la, dtype=float), np.asarray(sg, dtype=float) * np.ones_like(x)
    la = np.asarray(out, dtype=float)
    return la, np.ones_like(x)


def _extent(logf, start: float, direction: float, scale: float) -> float:
    """Walk geometrically away from ``start`` until the integrand has peaked and died."""
    steps = start + direction * scale * (np.exp2(np.arange(0, 48)) - 1.0)
    la, _ = _eval_log(logf, steps)
    la = np.where(np.isnan(la), -np.inf, la)
    top = np.max(la)
    if top == -np.inf:
        return float(steps[1])
    keep = np.nonzero(la > top - _DROP)[0]
    last = int(keep[-1])
    return float(steps[min(last + 1, len(steps) - 1)])


def _scan_grid(lo: float, hi: float, n_scan: int, scale: float) -> np.ndarray:
    # uniform points plus sinh-spaced clusters at both ends: spacing grows
    # linearly with the distance from a breakpoint, so a narrow feature a few
    # units past a breakpoint is still sampled when the segment is very long
    u = np.linspace(0.0, math.asinh((hi - lo) / scale), n_scan)
    off = scale * np.sinh(u)
    off = off[off < hi - lo]
    return np.unique(np.concatenate([np.linspace(lo, hi, n_scan), lo + off, hi - off]))


def _peak_points(grid: np.ndarray, la: np.ndarray, top: float, max_peaks: int = 32) -> list:
    """Scan points around each significant local maximum.

    Splitting there keeps a narrow bump from hiding between the nodes of a
    Kronrod rule laid over a long, slowly varying stretch.
    """
    inner = la[1:-1]
    is_max = (inner >= la[:-2]) & (inner >= la[2:]) & (inner > top - _DROP)
    idx = np.nonzero(is_max)[0] + 1
    if la[0] > top - _DROP and la[0] >= la[1]:
        idx = np.concatenate([[0], idx])
    if la[-1] > top - _DROP and la[-1] >= la[-2]:
        idx = np.concatenate([idx, [len(la) - 1]])
    if len(idx) > max_peaks:
        idx = idx[np.argsort(la[idx])[::-1][:max_peaks]]
    pts = set()
    for i in idx:
        x0 = float(grid[i])
        pts.add(x0)
        for step in (-1, 1):
            pts.add(float(grid[_flank(la, i, step)]))
            # geometric cuts scaled by the local width, so a narrow peak
            # sitting on a broad background keeps its tail resolved
            w = abs(float(grid[_flank(la, i, step, depth=1.0)]) - x0)
            if w > 0:
                off = w * np.exp2(np.arange(0, 64))
                off = off[off < grid[-1] - grid[0]]
                pts.update((x0 + step * off).tolist())
    return sorted(pts)


def _flank(la: np.ndarray, i: int, step: int, depth: float = 30.0) -> int:
    """First index past i where the peak has dropped by e^-depth or turns back up."""
    path = la[i::step] if step > 0 else la[i::-1]
    if len(path) < 2:
        return i
    dropped = path[1:] < path[0] - depth
    rising = (path[1:] > path[:-1]) & (path[:-1] < path[0])
    hit_drop = np.argmax(dropped) if dropped.any() else len(path) - 1
    hit_rise = np.argmax(rising) if rising.any() else len(path) - 1
    # a rise means the previous point was a local minimum; a drop lands on the point itself
    n = min(hit_drop + 1, hit_rise)
    return i + step * int(n)


def _log_segment(logf, a, b, cfg, scale, n_scan, strict):
    lo = a if math.isfinite(a) else _extent(logf, b, -1.0, scale)
    hi = b if math.isfinite(b) else _extent(logf, a, 1.0, scale)
    if not math.isfinite(a) and lo > b - scale:
        lo = b - scale
    if not math.isfinite(b) and hi < a + scale:
        hi = a + scale
    grid = _scan_grid(lo, hi, n_scan, scale)
    la, _ = _eval_log(logf, grid)
    if np.any(la == np.inf):
        raise NonFiniteIntegrand("log integrand is +inf on the scan grid")
    # NaN samples (e.g. overflow far outside the bulk) are skipped while
    # locating the bulk; any NaN inside it is caught by the quadrature itself.
    la = np.where(np.isnan(la), -np.inf, la)
    top = float(np.max(la))
    if top == -np.inf:
        return None, 0.0, -np.inf
    alive = np.nonzero(la > top - _DROP)[0]
    i0 = max(int(alive[0]) - 1, 0)
    i1 = min(int(alive[-1]) + 1, len(grid) - 1)
    # keep finite user limits exact when the bulk reaches them
    lo_eff = lo if i0 == 0 else float(grid[i0])
    hi_eff = hi if i1 == len(grid) - 1 else float(grid[i1])
    inner = [x for x in _peak_points(grid, la, top) if lo_eff < x < hi_eff]

    def shifted(x):
        l, s = _eval_log(logf, x)
        with np.errstate(under="ignore"):
            return s * np.exp(l - top)

    try:
        res = integrate(shifted, lo_eff, hi_eff, cfg, breakpoints=inner)
    except ToleranceNotMet as exc:
        if strict:
            raise
        res = exc.partial
    return res.value, res.error, top


def log_integrate(logf: Callable, a: float, b: float, cfg: QuadratureConfig = DEFAULT_CONFIG,
                  breakpoints: Sequence[float] = (), scale: float = 0.25,
                  n_scan: int = 4001, return_error: bool = False, strict: bool = True):
    """Integrate ``exp(logf)`` over [a, b] (either end may be infinite).

    ``logf`` is vectorised and returns ``log|f|`` or a ``(log|f|, sign)``
    tuple. The range is cut at the breakpoints and on each segment the
    maximum is located on a dense scan and factored out, so the integrand may
    over- or underflow doubles by any amount. With ``strict=False`` a
    subdivision limit returns the best estimate instead of raising.
    """
    if a == b:
        return (LogValue.zero(), 0.0) if return_error else LogValue.zero()
    if a > b:
        res = log_integrate(logf, b, a, cfg, breakpoints, scale, n_scan, return_error, strict)
        if return_error:
            return -res[0], res[1]
        return -res
    pts = [a] + sorted({float(p) for p in breakpoints if a < p < b}) + [b]
    if len(pts) == 2 and not math.isfinite(a) and not math.isfinite(b):
        pts = [a, 0.0, b]
    parts = [_log_segment(logf, lo, hi, cfg, scale, n_scan, strict) for lo, hi in zip(pts[:-1], pts[1:])]
    tops = [t for _, _, t in parts if t > -np.inf]
    if not tops:
        return (LogValue.zero(), 0.0) if return_error else LogValue.zero()
    top = max(tops)
    total = LogValue.zero()
    err = 0.0
    for val, e, t in parts:
        if val is None or val == 0:
            continue
        total = total + LogValue.from_float(val) * LogValue(t, 1)
        err += e * math.exp(min(t, 709.0))
    if return_error:
        return total, err
    return total


def integrate_gauss(f: Callable, a: float = -math.inf, b: float = math.inf,
                    cfg: QuadratureConfig = DEFAULT_CONFIG, breakpoints: Sequence[float] = ()):
    """int_a^b f dgamma with an error estimate.

    Infinite limits are truncated where the Gaussian-weighted integrand has
    dropped by e^-80 past its maximum; the neglected piece is bounded by the
    Mills-ratio tail |f(X)| (1 - Phi(X)) under the assumption that |f|
    does not grow past the cut, and that bound is folded into the error.
    Returns ``(value, error)``.
    """
    def logf(x):
        with np.errstate(over="ignore", invalid="ignore"):
            y = np.asarray(f(x), dtype=float) * np.ones_like(x)
        y = np.where(np.isfinite(y), y, np.nan)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(y)) + std_normal_logpdf(x), np.sign(y)

    val, err = log_integrate(logf, a, b, cfg, breakpoints, return_error=True)
    value = float(val)
    trunc = 0.0
    for end, sgn in ((b, 1.0), (a, -1.0)):
        if not math.isfinite(end):
            start = a if sgn > 0 else b
            cut = _extent(logf, start if math.isfinite(start) else 0.0, sgn, 0.25)
            la_cut = float(logf(np.array([cut]))[0][0])
            if math.isfinite(la_cut):
                log_bound = la_cut - float(std_normal_logpdf(cut)) + float(log_complement(abs(cut)))
                trunc += math.exp(min(log_bound, 709.0))
    total_err = err + trunc
    tol = max(cfg.abs_tol, cfg.rel_tol * abs(value))
    if total_err > tol:
        raise ToleranceNotMet(f"error estimate {total_err:.3e} exceeds tolerance {tol:.3e}")
    return value, total_err

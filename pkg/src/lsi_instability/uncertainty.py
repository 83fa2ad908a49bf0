"""Beckner-Hirschman side: h = sqrt(f(2 sqrt(pi) x)) g(x), its Fourier transform,
Shannon entropies, the Fourier-Wiener remainder and distances to Gaussians.

Convention: ``h_hat(xi) = int e^{-2 pi i x xi} h(x) dx`` and
``g(x) = 2^{1/4} e^{-pi x^2}``. Functions are passed around as
:class:`LogProfile` objects holding a vectorised ``log|h|`` so that the
weighted norms, which leave double range quickly, never exponentiate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from .families import PiecewiseLogDensity
from .functionals import lsi_deficit
from .gaussian import gauss_isf
from .io import rows_to_csv
from .logvalue import LogValue, log_abs_diff
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, log_integrate
from .transport import quantile_lower, quantile_upper

__all__ = [
    "LogProfile",
    "OptimizerParams",
    "WeightSpec",
    "SpectralProfile",
    "BHIResult",
    "RemainderResult",
    "DistanceResult",
    "DivergentIntegral",
    "NoBracket",
    "log_g",
    "optimizer_eval",
    "optimizer_profile",
    "lsi_to_bhi_transform",
    "fourier_transform",
    "shannon_entropy",
    "bhi_deficit",
    "fourier_wiener_remainder",
    "weighted_lp_norm",
    "gaussian_lp_norm_closed_form",
    "level_set_boundary",
    "truncated_gaussian_norm",
    "dist_to_optimizers",
    "normalized_distance_ratio",
]

SQRT_PI = math.sqrt(math.pi)
LOG_2 = math.log(2.0)
BH_CONST = 1.0 - LOG_2            # sharp constant in one dimension


class DivergentIntegral(ArithmeticError):
    """A weighted norm that is +infinity."""


class NoBracket(RuntimeError):
    """The optimizer search found its minimum on the edge of the search range."""


def log_g(x):
    """log g(x) with g(x) = 2^{1/4} e^{-pi x^2}."""
    x = np.asarray(x, dtype=float)
    return 0.25 * LOG_2 - math.pi * x * x


@dataclass(frozen=True)
class LogProfile:
    """A non-negative function on R through log h.

    ``support(eps)`` returns an interval outside which h^2 carries at most
    ``eps`` of its L^2 mass; ``breaks`` lists points where h is not smooth.
    """

    log_eval: Callable
    support: Callable
    symmetric: bool
    breaks: Tuple[float, ...] = ()
    name: str = "h"
    gaussian: Optional["OptimizerParams"] = None

    def __call__(self, x):
        return np.exp(self.log_eval(x))


@dataclass(frozen=True)
class OptimizerParams:
    a: float
    r: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"optimizer needs a > 0, got {self.a}")

    def log_eval(self, x):
        x = np.asarray(x, dtype=float)
        return 0.25 * math.log(2.0 * self.a / math.pi) - self.a * (x - self.r) ** 2


def optimizer_eval(params: OptimizerParams, x: float) -> LogValue:
    """G_{a,r}(x) = (2a/pi)^{1/4} e^{-a (x - r)^2}."""
    return LogValue(float(params.log_eval(x)), 1)


def optimizer_profile(a: float, r: float = 0.0) -> LogProfile:
    par = OptimizerParams(a, r)
    sd = 0.5 / math.sqrt(a)          # |G|^2 is the N(r, 1/(4a)) density

    def support(eps):
        z = float(gauss_isf(0.5 * eps))
        return r - z * sd, r + z * sd

    return LogProfile(par.log_eval, support, r == 0.0, (), f"G(a={a:g},r={r:g})", par)


def lsi_to_bhi_transform(f: PiecewiseLogDensity) -> LogProfile:
    """h(x) = sqrt(f(2 sqrt(pi) x)) g(x); int h^2 dx = int f dgamma."""
    scale = 2.0 * SQRT_PI

    def log_h(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * f.log_eval(scale * x) + log_g(x)

    def support(eps):
        if f.symmetric:
            hi = float(quantile_upper(f, 0.5 * eps)[0])
            return -hi / scale, hi / scale
        lo = float(quantile_lower(f, 0.5 * eps)[0])
        hi = float(quantile_upper(f, 0.5 * eps)[0])
        return lo / scale, hi / scale

    edges = sorted({p.lo / scale for p in f.full_pieces()[1:]})
    gauss = None
    # g_b maps to G_{pi, b/(2 sqrt(pi))}
    if len(f.pieces) == 1 and not f.symmetric and f.norm_minus_one == 0.0:
        pc = f.pieces[0]
        if getattr(pc, "log_r", None) == 0.0:
            gauss = OptimizerParams(math.pi, pc.b / scale)
    elif len(f.pieces) == 1 and f.symmetric and f.norm_minus_one == 0.0:
        gauss = OptimizerParams(math.pi, 0.0)
    return LogProfile(log_h, support, f.symmetric, tuple(edges), f"h[{f.name}]", gauss)


# spectral side -------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralProfile:
    """Samples of h on x_j = x0 + j dx and of h_hat on xi_m = xi0 + m dxi, dx dxi = 1/N."""

    x0: float
    dx: float
    log_h: np.ndarray = field(repr=False)
    xi0: float = 0.0
    hhat: np.ndarray = field(default=None, repr=False)
    support: Tuple[float, float] = (0.0, 0.0)
    truncation_bound: float = 0.0

    @property
    def n(self) -> int:
        return len(self.log_h)

    @property
    def dxi(self) -> float:
        return 1.0 / (self.n * self.dx)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def xi(self) -> np.ndarray:
        return self.xi0 + self.dxi * np.arange(self.n)

    @property
    def h(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_h)

    def norm_x(self) -> float:
        with np.errstate(under="ignore"):
            return math.sqrt(self.dx * math.fsum(np.exp(2.0 * self.log_h)))

    def norm_xi(self) -> float:
        return math.sqrt(self.dxi * math.fsum(np.abs(self.hhat) ** 2))

    def plancherel_error(self) -> float:
        return abs(self.norm_xi() - self.norm_x())

    def metadata(self) -> dict:
        return {"n": self.n, "x0": self.x0, "dx": self.dx, "xi0": self.xi0, "dxi": self.dxi,
                "support": list(self.support), "truncation_bound": self.truncation_bound,
                "norm_x": self.norm_x(), "norm_xi": self.norm_xi()}

    def to_csv(self, stride: int = 1) -> str:
        x, h, hh = self.x[::stride], self.h[::stride], self.hhat[::stride]
        return rows_to_csv(["x", "h", "re_hhat", "im_hhat"], zip(x, h, hh.real, hh.imag))


def fourier_transform(h: LogProfile, n: int = 2 ** 16, pad: float = 8.0,
                      eps: float = 1e-14) -> SpectralProfile:
    """Continuous transform of h sampled on a padded grid, via one FFT.

    ``h_hat(xi_m) = dx e^{-2 pi i x0 xi0} e^{-2 pi i x0 m dxi}
    FFT_j[h_j e^{-2 pi i j dx xi0}]`` is the Riemann sum of the continuous
    integral, exact up to aliasing and the truncation ``eps``.
    """
    if n < 16 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 16, got {n}")
    lo, hi = h.support(eps)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("profile support could not be certified")
    if eps > 1e-12:
        raise ValueError("truncation bound must be below 1e-12")
    length = pad * (hi - lo)
    centre = 0.5 * (lo + hi)
    dx = length / n
    x0 = centre - 0.5 * length
    j = np.arange(n)
    log_h = np.asarray(h.log_eval(x0 + dx * j), dtype=float)
    dxi = 1.0 / (n * dx)
    xi0 = -0.5 * n * dxi
    with np.errstate(under="ignore"):
        hv = np.exp(log_h)
    pre = hv * np.exp(-2j * math.pi * j * dx * xi0)
    spec = np.fft.fft(pre)
    m = np.arange(n)
    hhat = dx * np.exp(-2j * math.pi * x0 * xi0) * np.exp(-2j * math.pi * x0 * m * dxi) * spec
    return SpectralProfile(x0, dx, log_h, xi0, hhat, (lo, hi), eps)


def shannon_entropy(density, dx: float, log_density=None) -> float:
    """S(rho) = -int rho log rho, Riemann sum on a uniform grid, 0 log 0 = 0.

    Pass ``log_density`` instead of ``density`` when the samples are known in
    log form (they may underflow).
    """
    if log_density is None:
        rho = np.asarray(density, dtype=float)
        if np.any(rho < -1e-12):
            raise ValueError("negative density sample")
        pos = rho > 0
        with np.errstate(divide="ignore"):
            lr = np.where(pos, np.log(np.where(pos, rho, 1.0)), 0.0)
        terms = np.where(pos, rho * lr, 0.0)
    else:
        lr = np.asarray(log_density, dtype=float)
        with np.errstate(under="ignore", invalid="ignore"):
            terms = np.where(np.isfinite(lr), np.exp(lr) * lr, 0.0)
    return -dx * math.fsum(terms)


def _hhat_log_density(sp: SpectralProfile) -> np.ndarray:
    mod2 = np.abs(sp.hhat) ** 2
    with np.errstate(divide="ignore"):
        return np.log(mod2)


@dataclass(frozen=True)
class BHIResult:
    delta: float
    S_x: float
    S_xi: float
    n: int
    richardson: float
    norm_x: float
    plancherel_error: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _bhi_at(h: LogProfile, n: int, pad: float) -> Tuple[float, float, float, SpectralProfile]:
    sp = fourier_transform(h, n, pad)
    nx = sp.norm_x()
    if abs(nx * nx - 1.0) > 1e-6:
        raise ValueError(f"||h||_2^2 = {nx * nx:.12g} is not 1 within 1e-6")
    # renormalise inside the band before taking entropies
    lshift = -2.0 * math.log(nx)
    S_x = shannon_entropy(None, sp.dx, 2.0 * sp.log_h + lshift)
    S_xi = shannon_entropy(None, sp.dxi, _hhat_log_density(sp) + lshift)
    return S_x + S_xi - BH_CONST, S_x, S_xi, sp


def bhi_deficit(h: LogProfile, n: int = 2 ** 16, n_max: int = 2 ** 18, pad: float = 8.0,
                tol: float = 1e-6) -> BHIResult:
    """delta_BH(h) = S(|h|^2) + S(|h_hat|^2) - (1 - log 2), with grid doubling."""
    prev, *_ = _bhi_at(h, n // 2, pad)
    while True:
        cur, S_x, S_xi, sp = _bhi_at(h, n, pad)
        rich = abs(cur - prev)
        if rich < tol or n >= n_max:
            break
        prev, n = cur, 2 * n
    return BHIResult(cur, S_x, S_xi, n, rich, sp.norm_x(), sp.plancherel_error())


@dataclass(frozen=True)
class RemainderResult:
    remainder: float
    delta: float
    delta_bh: float

    @property
    def identity_residual(self) -> float:
        """delta(f) - remainder - delta_BH(h_f); zero up to grid error."""
        return self.delta - self.remainder - self.delta_bh

    def to_dict(self) -> dict:
        return {"remainder": self.remainder, "delta": self.delta, "delta_bh": self.delta_bh,
                "identity_residual": self.identity_residual}


def fourier_wiener_remainder(f: PiecewiseLogDensity, n: int = 2 ** 16, pad: float = 8.0,
                             cfg: QuadratureConfig = DEFAULT_CONFIG) -> RemainderResult:
    """int |W u|^2 log |W u|^2 dm with u = sqrt(f(2 sqrt(pi) .)), dm = g^2 dx.

    Since h_hat = (W u) g, the integrand is |h_hat|^2 log(|h_hat|^2 / g^2) d xi.
    """
    h = lsi_to_bhi_transform(f)
    bh = bhi_deficit(h, n, pad=pad)
    sp = fourier_transform(h, bh.n, pad)
    lr = _hhat_log_density(sp) - 2.0 * math.log(sp.norm_x())
    xi = sp.xi
    with np.errstate(under="ignore", invalid="ignore"):
        terms = np.where(np.isfinite(lr), np.exp(lr) * (lr - 2.0 * log_g(xi)), 0.0)
    rem = sp.dxi * math.fsum(terms)
    return RemainderResult(rem, lsi_deficit(f, cfg), bh.delta)


# weighted norms -------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSpec:
    """lebesgue: dx; power: |x|^lam dx; invgauss: g(x)^{-theta} dx."""

    kind: str = "lebesgue"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("lebesgue", "power", "invgauss"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.param < 0:
            raise ValueError("weight parameter must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "WeightSpec":
        """'lebesgue', 'power:1.5' or 'invgauss:1'."""
        kind, _, val = text.partition(":")
        kind = kind.strip().lower()
        if kind == "lebesgue":
            if val:
                raise ValueError("lebesgue weight takes no parameter")
            return cls()
        if not val:
            raise ValueError(f"weight {kind!r} needs a parameter, e.g. {kind}:1")
        return cls(kind, float(val))

    @property
    def symmetric(self) -> bool:
        return True

    def log_weight(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "lebesgue":
            return np.zeros_like(x)
        if self.kind == "power":
            if self.param == 0:
                return np.zeros_like(x)
            with np.errstate(divide="ignore"):
                return self.param * np.log(np.abs(x))
        return -self.param * log_g(x)

    def admits_gaussian(self, a: float, p: float) -> bool:
        """G_a is in L^p(w) iff a > theta pi / p for the inverse-Gaussian weight."""
        return self.kind != "invgauss" or a > self.param * math.pi / p

    def label(self) -> str:
        return "lebesgue" if self.kind == "lebesgue" else f"{self.kind}:{self.param:g}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param}


def gaussian_lp_norm_closed_form(a: float, p: float, w: WeightSpec, r: float = 0.0) -> LogValue:
    """||G_{a,r}||_{L^p(w)} in closed form.

    invgauss(theta), r = 0: ||G_a||^p = 2^{(p-theta)/4} (a/pi)^{(p-2)/4} (p - theta pi/a)^{-1/2}.
    power(lam), r = 0: ||G_a||^p = (2a/pi)^{p/4} (p a)^{-(lam+1)/2} Gamma((lam+1)/2).
    """
    if not a > 0 or not p > 0:
        raise ValueError("need a > 0 and p > 0")
    if w.kind == "power" and r != 0.0 and w.param != 0:
        raise NotImplementedError("closed form for shifted Gaussians under a power weight")
    if w.kind == "invgauss":
        th = w.param
        beta = p * a - th * math.pi
        if not beta > 0:
            raise DivergentIntegral(f"G_a not in L^{p:g}(dm_theta): need a > {th * math.pi / p:.6g}")
        # complete the square in -beta x^2 + 2 p a r x - p a r^2
        log_pp = (0.25 * p * math.log(2.0 * a / math.pi) - 0.25 * th * LOG_2
                  + 0.5 * math.log(math.pi / beta) + (p * a * r) ** 2 / beta - p * a * r * r)
    else:
        lam = w.param if w.kind == "power" else 0.0
        log_pp = (0.25 * p * math.log(2.0 * a / math.pi) - 0.5 * (lam + 1) * math.log(p * a)
                  + math.lgamma(0.5 * (lam + 1)))
    return LogValue(log_pp / p, 1)


def _norm_breaks(h: LogProfile, w: WeightSpec) -> list:
    bps = list(h.breaks)
    if w.kind == "power" and w.param > 0:
        bps.append(0.0)
    return sorted(set(bps))


def _check_weight_integrable(h: LogProfile, p: float, w: WeightSpec):
    if h.gaussian is not None and not w.admits_gaussian(h.gaussian.a, p):
        raise DivergentIntegral(
            f"{h.name} is not in L^{p:g}(dm_theta): need a > theta pi / p = {w.param * math.pi / p:.6g}")


def weighted_lp_norm(h: LogProfile, p: float, w: WeightSpec,
                     cfg: QuadratureConfig = DEFAULT_CONFIG) -> LogValue:
    """(int |h|^p w dx)^{1/p} by log-domain quadrature."""
    if not p > 0:
        raise ValueError("p must be > 0")
    _check_weight_integrable(h, p, w)

    def logfun(x):
        return p * h.log_eval(x) + w.log_weight(x)

    val = log_integrate(logfun, -math.inf, math.inf, cfg, breakpoints=_norm_breaks(h, w))
    if not math.isfinite(val.log_abs):
        raise DivergentIntegral(f"weighted norm of {h.name} diverges")
    return LogValue(val.log_abs / p, 1)


def _diff_lp_pow(h: LogProfile, G: OptimizerParams, p: float, w: WeightSpec,
                 cfg: QuadratureConfig) -> LogValue:
    """int |h - G_{a,r}|^p w dx."""
    def logfun(x):
        la, _ = log_abs_diff(h.log_eval(x), G.log_eval(x))
        return p * la + w.log_weight(x)

    bps = _norm_breaks(h, w) + [G.r]
    return log_integrate(logfun, -math.inf, math.inf, cfg, breakpoints=sorted(set(bps)), strict=False)


def level_set_boundary(a: float, w: float) -> float:
    """x0 > 0 with G_a(x0) = w G_pi(x0), so that {G_a >= w G_pi} = [-x0, x0]."""
    num = math.log(a) - math.log(math.pi) - 4.0 * math.log(w)
    if a == math.pi or num / (a - math.pi) < 0:
        raise ValueError("level set is not a bounded interval for these (a, w)")
    return 0.5 * math.sqrt(num / (a - math.pi))


def truncated_gaussian_norm(a: float, w: float, p: float, theta: float,
                            method: str = "closed") -> LogValue:
    """||G_a 1_{M(a,w)}||_{L^p(dm_theta)}, M(a,w) = {G_a >= w G_pi}."""
    x0 = level_set_boundary(a, w)
    beta = p * a - theta * math.pi
    if not beta > 0:
        raise DivergentIntegral("need a > theta pi / p")
    if method == "closed":
        log_pp = (0.25 * p * math.log(2.0 * a / math.pi) - 0.25 * theta * LOG_2
                  + 0.5 * math.log(math.pi / beta) + math.log(special.erf(math.sqrt(beta) * x0)))
        return LogValue(log_pp / p, 1)
    G = OptimizerParams(a)
    wt = WeightSpec("invgauss", theta)

    def logfun(x):
        return p * G.log_eval(x) + wt.log_weight(x)

    val = log_integrate(logfun, -x0, x0, DEFAULT_CONFIG, breakpoints=(0.0,))
    return LogValue(val.log_abs / p, 1)


# distance to the optimizer set ------------------------------------------------------

@dataclass(frozen=True)
class DistanceResult:
    distance: LogValue
    a: float
    r: float
    h_norm: LogValue
    bracket_ok: bool
    evaluations: int

    @property
    def ratio(self) -> float:
        if self.h_norm.is_zero:
            return math.nan
        return float(self.distance / self.h_norm)

    def to_dict(self) -> dict:
        return {"log_distance": self.distance.log_abs, "log_h_norm": self.h_norm.log_abs,
                "ratio": self.ratio, "a": self.a, "r": self.r, "bracket_ok": self.bracket_ok,
                "evaluations": self.evaluations}


def _search_range(p: float, w: WeightSpec, a_max: float) -> Tuple[float, float]:
    if w.kind == "invgauss" and w.param > 0:
        lo = math.log(w.param * math.pi / p) + 1e-6
    else:
        lo = math.log(math.pi * 1e-3)
    return lo, math.log(a_max)


def dist_to_optimizers(h: LogProfile, p: float, w: WeightSpec, a_max: float = 1e3 * math.pi,
                       n_scan: int = 33, cfg: QuadratureConfig = DEFAULT_CONFIG,
                       xtol: float = 1e-7) -> DistanceResult:
    """inf over G_{a,r} of ||h - G_{a,r}||_{L^p(w)}.

    With h and w both even, r = 0 by rearrangement and the search is over
    log a only: a coarse scan locates a bracket, golden section refines it.
    Otherwise r is optimised for every trial a.
    """
    lo, hi = _search_range(p, w, a_max)
    count = [0]

    def obj_a_r(la, r):
        count[0] += 1
        return _diff_lp_pow(h, OptimizerParams(math.exp(la), r), p, w, cfg).log_abs

    if h.symmetric and w.symmetric:
        def best_r(la):
            return 0.0, obj_a_r(la, 0.0)
    else:
        lo_s, hi_s = h.support(1e-14)

        def best_r(la):
            res = optimize.minimize_scalar(lambda r: obj_a_r(la, r), bounds=(lo_s, hi_s),
                                           method="bounded", options={"xatol": 1e-8})
            return float(res.x), float(res.fun)

    grid = np.linspace(lo, hi, n_scan)
    vals = [best_r(la)[1] for la in grid]
    i = int(np.argmin(vals))
    bracket_ok = 0 < i < n_scan - 1
    if not bracket_ok and i == n_scan - 1:
        raise NoBracket("distance still decreasing at a_max; enlarge the search range")
    a_lo = grid[max(i - 1, 0)]
    a_hi = grid[min(i + 1, n_scan - 1)]
    if vals[i] == -math.inf:
        la_best = grid[i]
    else:
        res = optimize.minimize_scalar(lambda la: best_r(la)[1], bracket=(a_lo, grid[i], a_hi)
                                       if bracket_ok else None, bounds=None if bracket_ok else (a_lo, a_hi),
                                       method="golden" if bracket_ok else "bounded",
                                       tol=xtol if bracket_ok else None)
        la_best = float(res.x)
    r_best, best = best_r(la_best)
    if best > vals[i]:
        la_best, r_best, best = grid[i], best_r(grid[i])[0], vals[i]
    # monotone beyond the bracket: the far end must not undercut the minimum
    if vals[-1] < best:
        bracket_ok = False
    dist = LogValue(best / p, 1) if math.isfinite(best) else LogValue.zero()
    h_norm = weighted_lp_norm(h, p, w, cfg)
    return DistanceResult(dist, math.exp(la_best), r_best, h_norm, bracket_ok, count[0])


def normalized_distance_ratio(h: LogProfile, p: float, w: WeightSpec, **kw) -> float:
    """dist_{L^p(w)}(h, optimizers) / ||h||_{L^p(w)}."""
    return dist_to_optimizers(h, p, w, **kw).ratio

"""One-dimensional optimal transport against piecewise densities.

In 1-D the monotone coupling is optimal, so
``W_p(mu, nu)^p = int_0^1 |F_mu^{-1}(u) - F_nu^{-1}(u)|^p du``. Quantiles
are inverted piece by piece in closed form (Gaussian ``ndtri`` for flat and
tilted pieces, ``tan`` for the Cauchy piece, bisection on the bridge) and
always from the nearer tail, so mass of order ``r_k`` far out is resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .families import DivergentMoment, ExpTilt, PiecewiseLogDensity, Rational
from .functionals import (
    CheckResult,
    Divergent,
    fisher_info,
    lsi_deficit,
    moment,
    rel_entropy,
)
from .gaussian import gaussian_moment
from .io import rows_to_csv
from .logvalue import LogValue
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate

__all__ = [
    "cdf",
    "sf",
    "log_sf",
    "quantile",
    "quantile_lower",
    "quantile_upper",
    "QuantileTable",
    "wasserstein_p",
    "talagrand_deficit",
    "hwi_chain",
    "TransportReport",
    "SandwichResult",
    "moment_sandwich_check",
]

_V_MAX = 740.0    # e^{-740} is below the smallest normal double


@dataclass(frozen=True)
class _Layout:
    pieces: tuple
    masses: np.ndarray        # f_tilde masses, left to right
    from_left: np.ndarray     # mass strictly left of piece i
    from_right: np.ndarray    # mass strictly right of piece i
    norm: float


def _layout(f: PiecewiseLogDensity) -> _Layout:
    lay = f.__dict__.get("_layout")
    if lay is not None:
        return lay
    pieces = tuple(f.full_pieces())
    masses = np.array([p.total_mass() for p in pieces])
    from_left = np.concatenate([[0.0], np.cumsum(masses)[:-1]])
    from_right = np.concatenate([np.cumsum(masses[::-1])[::-1][1:], [0.0]])
    lay = _Layout(pieces, masses, from_left, from_right, f.norm)
    # densities are immutable, so the layout can ride along with them
    object.__setattr__(f, "_layout", lay)
    return lay


def cdf(f: PiecewiseLogDensity, x):
    """P(X <= x) under f dgamma, vectorised."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lay = _layout(f)
    out = np.empty_like(x)
    for i, pc in enumerate(lay.pieces):
        sel = (x >= pc.lo) & (x <= pc.hi) if i == 0 else (x > pc.lo) & (x <= pc.hi)
        if np.any(sel):
            xs = x[sel]
            # sum the smaller side for precision
            left = lay.from_left[i] + pc.lower_mass(xs)
            right = lay.from_right[i] + pc.upper_mass(xs)
            out[sel] = np.where(left <= right, left / lay.norm, 1.0 - right / lay.norm)
    return out


def sf(f: PiecewiseLogDensity, x):
    """P(X > x), accurate in the upper tail."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lay = _layout(f)
    out = np.empty_like(x)
    for i, pc in enumerate(lay.pieces):
        sel = (x >= pc.lo) & (x <= pc.hi) if i == 0 else (x > pc.lo) & (x <= pc.hi)
        if np.any(sel):
            xs = x[sel]
            left = lay.from_left[i] + pc.lower_mass(xs)
            right = lay.from_right[i] + pc.upper_mass(xs)
            out[sel] = np.where(right <= left, right / lay.norm, 1.0 - left / lay.norm)
    return out


def log_sf(f: PiecewiseLogDensity, x: float) -> LogValue:
    """log P(X > x) as a LogValue; exact in log form on a final tilt piece."""
    last = f.full_pieces()[-1]
    if isinstance(last, ExpTilt) and x >= last.lo:
        return LogValue(float(last.log_mass_between(x, last.hi)) - f.log_norm, 1)
    return LogValue.from_float(float(sf(f, x)[0]))


def quantile_lower(f: PiecewiseLogDensity, q):
    """x with P(X <= x) = q; accurate for small q."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    lay = _layout(f)
    m = q * lay.norm
    out = np.empty_like(q)
    edges = lay.from_left
    idx = np.clip(np.searchsorted(edges, m, side="right") - 1, 0, len(lay.pieces) - 1)
    for i, pc in enumerate(lay.pieces):
        sel = idx == i
        if np.any(sel):
            out[sel] = pc.inv_lower(np.clip(m[sel] - edges[i], 0.0, lay.masses[i]))
    return out


def quantile_upper(f: PiecewiseLogDensity, q):
    """x with P(X > x) = q; accurate for small q."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    lay = _layout(f)
    m = q * lay.norm
    out = np.empty_like(q)
    edges = lay.from_right
    # from_right decreases left to right
    rev = edges[::-1]
    idx_rev = np.clip(np.searchsorted(rev, m, side="right") - 1, 0, len(lay.pieces) - 1)
    idx = len(lay.pieces) - 1 - idx_rev
    for i, pc in enumerate(lay.pieces):
        sel = idx == i
        if np.any(sel):
            out[sel] = pc.inv_upper(np.clip(m[sel] - edges[i], 0.0, lay.masses[i]))
    return out


def quantile(f: PiecewiseLogDensity, u):
    """F^{-1}(u) for u in (0, 1)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("quantile level must lie in (0, 1)")
    out = np.empty_like(u)
    lo = u <= 0.5
    if np.any(lo):
        out[lo] = quantile_lower(f, u[lo])
    if np.any(~lo):
        out[~lo] = quantile_upper(f, 1.0 - u[~lo])
    return out


@dataclass(frozen=True)
class QuantileTable:
    """Tabulated quantile function on a grid dense in both tails.

    Between nodes the table interpolates linearly in u; outside
    [u[0], u[-1]] it calls back into the exact piecewise inverse.
    """

    u: np.ndarray
    values: np.ndarray
    density: PiecewiseLogDensity = field(repr=False)

    @classmethod
    def build(cls, f: PiecewiseLogDensity, n_tail: int = 241, n_core: int = 401,
              u_min: float = 1e-12) -> "QuantileTable":
        tail = np.logspace(math.log10(u_min), math.log10(0.05), n_tail)
        core = np.linspace(0.05, 0.95, n_core)[1:-1]
        u = np.unique(np.concatenate([tail, core, 1.0 - tail[::-1]]))
        return cls(u, quantile(f, u), f)

    def __call__(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.interp(u, self.u, self.values)
        outside = (u < self.u[0]) | (u > self.u[-1])
        if np.any(outside):
            out[outside] = quantile(self.density, u[outside])
        return out

    def max_roundtrip_error(self) -> float:
        """max |F(F^{-1}(u)) - u| over the nodes, with each side taken from its own tail."""
        lower = self.u <= 0.5
        err_lo = np.abs(cdf(self.density, self.values[lower]) - self.u[lower])
        err_hi = np.abs(sf(self.density, self.values[~lower]) - (1.0 - self.u[~lower]))
        return float(max(err_lo.max(initial=0.0), err_hi.max(initial=0.0)))


def _has_infinite_moment(f: PiecewiseLogDensity) -> bool:
    return any(isinstance(p, Rational) and math.isinf(p.hi) for p in f.pieces)


def _v_breaks(masses_from_tail: np.ndarray, norm: float) -> list:
    out = []
    for m in masses_from_tail:
        q = m / norm
        if 0 < q < 0.5:
            out.append(-math.log(q))
    return out


def _half_integral(mu, nu, p, side, cfg):
    """int over the tail half u in (0, 1/2] (side=-1) or [1/2, 1) (side=+1), in v = -log(tail mass)."""
    inv = quantile_upper if side > 0 else quantile_lower

    def integrand(v):
        q = np.exp(-v)
        d = np.abs(inv(mu, q) - inv(nu, q))
        with np.errstate(under="ignore"):
            return d ** p * q

    lay_mu, lay_nu = _layout(mu), _layout(nu)
    edge = "from_right" if side > 0 else "from_left"
    bps = _v_breaks(getattr(lay_mu, edge), lay_mu.norm) + _v_breaks(getattr(lay_nu, edge), lay_nu.norm)
    return integrate(integrand, math.log(2.0), _V_MAX, cfg, breakpoints=bps)


def wasserstein_pp(mu: PiecewiseLogDensity, nu: PiecewiseLogDensity, p: float,
                   cfg: QuadratureConfig = DEFAULT_CONFIG) -> tuple:
    """(W_p^p, error estimate)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    for f in (mu, nu):
        if _has_infinite_moment(f):
            raise DivergentMoment("W_p needs finite p-th moments")
    upper = _half_integral(mu, nu, p, +1, cfg)
    if mu.symmetric and nu.symmetric:
        return 2.0 * upper.value, 2.0 * upper.error
    lower = _half_integral(mu, nu, p, -1, cfg)
    return upper.value + lower.value, upper.error + lower.error


def wasserstein_p(mu: PiecewiseLogDensity, nu: PiecewiseLogDensity, p: float,
                  cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """W_p between mu dgamma and nu dgamma via the quantile coupling."""
    val, _ = wasserstein_pp(mu, nu, p, cfg)
    return max(val, 0.0) ** (1.0 / p)


def _gamma() -> PiecewiseLogDensity:
    from .families import make_standard_gaussian
    return make_standard_gaussian()


def talagrand_deficit(mu: PiecewiseLogDensity, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """delta_Tal = 2 H - W_2^2(mu, gamma)."""
    H = rel_entropy(mu, cfg)
    w2sq, _ = wasserstein_pp(mu, _gamma(), 2.0, cfg)
    return 2.0 * H - w2sq


@dataclass
class TransportReport:
    """W_p distances to gamma, the Talagrand deficit and the HWI chain."""

    W: Dict[float, float]
    delta_tal: float
    delta: float
    I: float
    H: float
    hwi_fisher: float           # (sqrt(I) - W_2)^2 / 2
    hwi_entropy: float          # (sqrt(2H) - W_2)^2 / 2
    tal_ratio: Optional[float]  # delta_Tal^2 / (16 H); None when H = 0
    errors: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, float] = field(default_factory=dict)

    def chain(self) -> list:
        vals = [self.delta, self.hwi_fisher, self.hwi_entropy]
        if self.tal_ratio is not None:
            vals.append(self.tal_ratio)
        return vals

    def chain_holds(self, tol: float = 1e-8) -> bool:
        c = self.chain()
        return all(a >= b - tol for a, b in zip(c[:-1], c[1:]))

    def csv_header(self) -> list:
        return ["s", "t", "k", "p", "W_p", "delta_tal", "delta", "hwi_fisher", "hwi_entropy", "tal_ratio"]

    def csv_rows(self) -> list:
        key = [self.params.get("s"), self.params.get("t"), self.params.get("k")]
        return [key + [p, self.W[p], self.delta_tal, self.delta, self.hwi_fisher, self.hwi_entropy,
                       self.tal_ratio] for p in sorted(self.W)]

    def to_csv(self) -> str:
        return rows_to_csv(self.csv_header(), self.csv_rows())

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "W": {format(p, "g"): v for p, v in sorted(self.W.items())},
            "delta_tal": self.delta_tal,
            "chain": {"delta": self.delta, "hwi_fisher": self.hwi_fisher,
                      "hwi_entropy": self.hwi_entropy, "tal_ratio": self.tal_ratio},
            "chain_holds": self.chain_holds(),
            "errors": dict(self.errors),
        }


def hwi_chain(mu: PiecewiseLogDensity, ps: Sequence[float] = (1.0, 2.0),
              cfg: QuadratureConfig = DEFAULT_CONFIG) -> TransportReport:
    """delta >= (sqrt(I) - W_2)^2/2 >= (sqrt(2H) - W_2)^2/2 >= delta_Tal^2/(16 H)."""
    I = fisher_info(mu, cfg)
    H = rel_entropy(mu, cfg)
    delta = lsi_deficit(mu, cfg)
    g = _gamma()
    W: Dict[float, float] = {}
    errors: Dict[str, float] = {}
    w2sq, e2 = wasserstein_pp(mu, g, 2.0, cfg)
    for p in sorted(set(float(p) for p in ps) | {2.0}):
        if p == 2.0:
            val, err = w2sq, e2
        else:
            val, err = wasserstein_pp(mu, g, p, cfg)
        W[p] = max(val, 0.0) ** (1.0 / p)
        errors[f"W{format(p, 'g')}^p"] = err
    w2 = W[2.0]
    dtal = 2.0 * H - w2sq
    t1 = 0.5 * (math.sqrt(max(I, 0.0)) - w2) ** 2
    t2 = 0.5 * (math.sqrt(max(2.0 * H, 0.0)) - w2) ** 2
    t3 = dtal * dtal / (16.0 * H) if H > 0 else None
    params = {}
    if mu.params is not None:
        d = mu.params.to_dict()
        params = {k: d[k] for k in ("s", "t", "k") if k in d}
    return TransportReport(W, dtal, delta, I, H, t1, t2, t3, errors, params)


@dataclass(frozen=True)
class SandwichResult:
    p: float
    lower: float
    value: float
    upper: float
    slack: float = 1e-9

    @property
    def holds(self) -> bool:
        return self.lower - self.slack <= self.value <= self.upper + self.slack

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {"p": self.p, "lower": self.lower, "value": self.value, "upper": self.upper, "holds": self.holds}


def moment_sandwich_check(mu: PiecewiseLogDensity, p: float,
                          cfg: QuadratureConfig = DEFAULT_CONFIG) -> SandwichResult:
    """2^{1-p} m_p(mu) - m_p(gamma) <= W_p^p <= 2^{p-1} (m_p(mu) + m_p(gamma)).

    For p = 1 the sharper m_1(mu) - m_1(gamma) <= W_1 <= m_1(mu) + m_1(gamma)
    is used (it is the same bound at p = 1).
    """
    mp = moment(mu, p, cfg)
    if isinstance(mp, Divergent):
        raise DivergentMoment(mp.reason)
    mg = gaussian_moment(p)
    val, _ = wasserstein_pp(mu, _gamma(), p, cfg)
    lower = 2.0 ** (1 - p) * mp - mg
    upper = 2.0 ** (p - 1) * (mp + mg)
    return SandwichResult(float(p), lower, val, upper)

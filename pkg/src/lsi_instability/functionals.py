"""Fisher information, relative entropy, LSI deficit, moments and L^p distances.

Each functional is assembled from the per-piece integrals of
:class:`~lsi_instability.families.PiecewiseLogDensity`; normalisation enters
only through ``log ||f_tilde||``, so the near-cancellation in the deficit
never happens in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np

from .families import DivergentMoment, ExpTilt, PiecewiseLogDensity
from .gaussian import gaussian_moment, std_normal_logpdf
from .io import rows_to_csv
from .logvalue import LogValue, log_abs_diff
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, log_integrate

__all__ = [
    "Divergent",
    "FunctionalReport",
    "CheckResult",
    "fisher_info",
    "rel_entropy",
    "lsi_deficit",
    "moment",
    "lp_dist_to_one",
    "sqrt_l2_gap",
    "compute_report",
    "tensorize",
    "chi_moment",
    "pinsker_check",
    "entropy_lp_bound_check",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Divergent:
    """Tag for an integral that is +infinity."""

    reason: str = ""

    def __float__(self):
        return math.inf

    def to_dict(self):
        return {"divergent": True, "reason": self.reason}


MomentValue = Union[float, Divergent]


def _uses_quadrature(f: PiecewiseLogDensity) -> bool:
    return any(not isinstance(p, ExpTilt) for p in f.pieces)


def _err(f: PiecewiseLogDensity, value: float, cfg: QuadratureConfig) -> float:
    if _uses_quadrature(f):
        return max(cfg.abs_tol, cfg.rel_tol * abs(value))
    return 64 * _EPS * max(abs(value), 1.0)


def fisher_info(f: PiecewiseLogDensity, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """I(f) = int f'^2 / f dgamma."""
    total = f.half_factor * math.fsum(p.fisher(cfg) for p in f.pieces)
    return total / f.norm


def rel_entropy(f: PiecewiseLogDensity, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """H(f) = int f log f dgamma = (1/||f~||) int f~ log f~ dgamma - log ||f~||."""
    total = f.half_factor * math.fsum(p.entropy(cfg) for p in f.pieces)
    return total / f.norm - f.log_norm


def lsi_deficit(f: PiecewiseLogDensity, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """delta(f) = I/2 - H, combined piece by piece before summing."""
    total = f.half_factor * math.fsum(p.deficit_part(cfg) for p in f.pieces)
    return total / f.norm + f.log_norm


def moment(f: PiecewiseLogDensity, p: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> MomentValue:
    """m_p(f dgamma) = int |x|^p f dgamma, or :class:`Divergent`."""
    if p < 0:
        raise ValueError(f"moment order must be >= 0, got {p}")
    try:
        total = f.half_factor * math.fsum(pc.abs_moment(p, cfg) for pc in f.pieces)
    except DivergentMoment as exc:
        return Divergent(str(exc))
    return total / f.norm


def _tilt_crossing(piece: ExpTilt, log_scale: float) -> Optional[float]:
    # where c * r e^{b x - b^2/2} = 1
    if piece.b == 0:
        return None
    x = (0.5 * piece.b * piece.b - piece.log_r - log_scale) / piece.b
    return x if piece.lo < x < piece.hi else None


def lp_dist_to_one(f: PiecewiseLogDensity, p: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> LogValue:
    """||f - 1||_{L^p(dgamma)} as a LogValue (it overflows doubles for large tilts)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    log_c = -f.log_norm
    acc = LogValue.zero()
    for pc in f.pieces:
        bps = list(pc.breakpoints())
        if isinstance(pc, ExpTilt):
            cross = _tilt_crossing(pc, log_c)
            if cross is not None:
                bps.append(cross)

        def logfun(x, pc=pc):
            la, _ = log_abs_diff(pc.log_value(x) + log_c, 0.0)
            return p * la + std_normal_logpdf(x)

        acc = acc + log_integrate(logfun, pc.lo, pc.hi, cfg, breakpoints=bps)
    acc = acc * f.half_factor
    if acc.is_zero:
        return acc
    return LogValue(acc.log_abs / p, 1)


def sqrt_l2_gap(f: PiecewiseLogDensity, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """(1/2) ||sqrt(f) - 1||_{L^2(dgamma)}^2, reported next to the deficit."""
    log_c = -f.log_norm
    acc = LogValue.zero()
    for pc in f.pieces:
        def logfun(x, pc=pc):
            la, _ = log_abs_diff(0.5 * (pc.log_value(x) + log_c), 0.0)
            return 2.0 * la + std_normal_logpdf(x)
        acc = acc + log_integrate(logfun, pc.lo, pc.hi, cfg, breakpoints=pc.breakpoints())
    return 0.5 * f.half_factor * float(acc)


@dataclass
class FunctionalReport:
    """Scalar functionals of one measure f dgamma."""

    I: float
    H: float
    delta: float
    moments: Dict[float, MomentValue] = field(default_factory=dict)
    lp: Dict[float, LogValue] = field(default_factory=dict)
    errors: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, float] = field(default_factory=dict)
    dimension: int = 1
    moment_lower: Dict[float, float] = field(default_factory=dict)

    def moment_float(self, p: float) -> float:
        return float(self.moments[p])

    def lp_float(self, p: float) -> float:
        return float(self.lp[p])

    def csv_header(self) -> list:
        cols = ["s", "t", "k", "I", "H", "delta"]
        cols += [f"m{_pkey(p)}" for p in sorted(self.moments)]
        cols += [f"l{_pkey(p)}" for p in sorted(self.lp)]
        cols += [f"err_{name}" for name in sorted(self.errors)]
        return cols

    def csv_values(self) -> list:
        vals = [self.params.get("s"), self.params.get("t"), self.params.get("k"), self.I, self.H, self.delta]
        vals += [float(self.moments[p]) for p in sorted(self.moments)]
        vals += [float(self.lp[p]) for p in sorted(self.lp)]
        vals += [self.errors[name] for name in sorted(self.errors)]
        return vals

    def to_csv(self) -> str:
        return rows_to_csv(self.csv_header(), [self.csv_values()])

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "dimension": self.dimension,
            "I": self.I,
            "H": self.H,
            "delta": self.delta,
            "moments": {_pkey(p): (v.to_dict() if isinstance(v, Divergent) else v)
                        for p, v in sorted(self.moments.items())},
            "moment_lower": {_pkey(p): v for p, v in sorted(self.moment_lower.items())},
            "lp_dist_to_one": {_pkey(p): {"value": float(v), "log": v.log_abs} for p, v in sorted(self.lp.items())},
            "errors": dict(sorted(self.errors.items())),
        }


def _pkey(p: float) -> str:
    return str(int(p)) if float(p) == int(p) else format(p, "g")


def _density_params(f: PiecewiseLogDensity) -> dict:
    if f.params is None:
        return {}
    d = f.params.to_dict()
    return {k: d[k] for k in ("s", "t", "k") if k in d}


def compute_report(f: PiecewiseLogDensity, moment_ps: Sequence[float] = (1, 2),
                   lp_ps: Sequence[float] = (1, 2), cfg: QuadratureConfig = DEFAULT_CONFIG) -> FunctionalReport:
    I = fisher_info(f, cfg)
    H = rel_entropy(f, cfg)
    delta = lsi_deficit(f, cfg)
    moments = {float(p): moment(f, p, cfg) for p in moment_ps}
    lp = {float(p): lp_dist_to_one(f, p, cfg) for p in lp_ps}
    errors = {"I": _err(f, I, cfg), "H": _err(f, H, cfg), "delta": _err(f, delta, cfg)}
    for p, v in moments.items():
        errors[f"m{_pkey(p)}"] = _err(f, float(v), cfg) if not isinstance(v, Divergent) else math.inf
    for p, v in lp.items():
        errors[f"l{_pkey(p)}"] = max(cfg.abs_tol, cfg.rel_tol * float(v))
    return FunctionalReport(I, H, delta, moments, lp, errors, _density_params(f))


def chi_moment(p: float, dof: int) -> float:
    """E|Z|^p for Z ~ gamma_dof, i.e. the p-th moment of the chi distribution."""
    if dof < 0:
        raise ValueError("degrees of freedom must be >= 0")
    if dof == 0:
        return 0.0 if p > 0 else 1.0
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma(0.5 * (dof + p)) - math.lgamma(0.5 * dof))


def tensorize(report: FunctionalReport, n: int) -> FunctionalReport:
    """Report for mu x gamma_{n-1} on R^n from the one-dimensional report.

    I, H and delta are additive over products and gamma_{n-1} contributes 0;
    m_2 gains n - 1; other moments get the lower bound
    2^{1-p} m_p(mu) - m_p(gamma_{n-1}).
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if n == 1:
        return report
    moments: Dict[float, MomentValue] = {}
    lower: Dict[float, float] = {}
    for p, v in report.moments.items():
        if p == 2 and not isinstance(v, Divergent):
            moments[p] = (n - 1) + v
        elif isinstance(v, Divergent):
            moments[p] = v
        else:
            lower[p] = 2.0 ** (1 - p) * v - chi_moment(p, n - 1)
    out = FunctionalReport(report.I, report.H, report.delta, moments, dict(report.lp),
                           dict(report.errors), dict(report.params), n, lower)
    out.params["n"] = n
    return out


@dataclass(frozen=True)
class CheckResult:
    """lhs <= rhs + slack."""

    name: str
    lhs: float
    rhs: float
    slack: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + self.slack

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "holds": self.holds}


def pinsker_check(f: PiecewiseLogDensity, cfg: QuadratureConfig = DEFAULT_CONFIG) -> CheckResult:
    """||f - 1||_1 <= sqrt(2 H(f))."""
    l1 = float(lp_dist_to_one(f, 1.0, cfg))
    H = rel_entropy(f, cfg)
    return CheckResult("pinsker", l1, math.sqrt(max(2.0 * H, 0.0)), 1e-9)


def entropy_lp_bound_check(f: PiecewiseLogDensity, p: float,
                           cfg: QuadratureConfig = DEFAULT_CONFIG) -> CheckResult:
    """H(f) <= 2/(p-1) ||f-1||_p^p + 2 ||f-1||_p, from z log z <= 2/(p-1)|z-1|^p + 2|z-1|."""
    if not p > 1:
        raise ValueError("p must be > 1")
    H = rel_entropy(f, cfg)
    lp = lp_dist_to_one(f, p, cfg)
    if lp.is_zero:
        rhs = 0.0
    else:
        rhs = float(LogValue(lp.log_abs * p + math.log(2.0 / (p - 1)), 1) + 2.0 * lp)
    return CheckResult(f"entropy_l{_pkey(p)}", H, rhs, 1e-9)

"""Densities with respect to the standard Gaussian, stored as analytic pieces.

A density ``f = c * f_tilde`` is kept as an ordered list of pieces describing
``f_tilde`` on ``[0, inf)`` (even extension implied) or on the whole line.
Each piece knows its own Gaussian-weighted mass, Fisher, entropy and moment
integrals, in closed form when it can; the functionals combine them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .gaussian import (
    LOG_SQRT_2PI,
    abs_moment_between,
    gauss_isf,
    gauss_isf_log,
    gauss_mass,
    gauss_ppf,
    incomplete_gaussian_moment,
    log_complement,
    log_mills_ratio,
    std_normal_logpdf,
)
from .io import dumps_json
from .logvalue import LogValue, log_abs_diff
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, log_integrate

__all__ = [
    "Piece",
    "ExpTilt",
    "Flat",
    "Bridge",
    "BridgeSpec",
    "Rational",
    "GenericGrid",
    "Mirrored",
    "PiecewiseLogDensity",
    "BumpParams",
    "HeavyTailParams",
    "DivergentMoment",
    "make_bump_family",
    "make_shifted_gaussian",
    "make_heavytail_family",
    "make_standard_gaussian",
    "evaluate",
    "bump_params",
    "density_from_dict",
]


class DivergentMoment(ArithmeticError):
    """Raised when an integral of the density against |x|^p is infinite."""


def log_gauss_mass(a, b):
    """log(Phi(b) - Phi(a)) for a <= b, stable in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    la_up = np.asarray(log_complement(a))
    lb_up = np.asarray(log_complement(b))
    la_lo = np.asarray(log_complement(-a))
    lb_lo = np.asarray(log_complement(-b))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        upper = la_up + np.log(-np.expm1(lb_up - la_up))
        lower = lb_lo + np.log(-np.expm1(la_lo - lb_lo))
    out = np.where(a > 0, upper, lower)
    out = np.where(a >= b, -np.inf, out)
    return float(out) if out.ndim == 0 else out


def _ppf_from_lower(p):
    return gauss_ppf(p)


# Gauss-Legendre rule for short smooth pieces (bridges)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


class Piece:
    """One analytic piece of ``f_tilde`` on [lo, hi].

    Subclasses provide ``log_value`` and ``dlog``; everything else falls
    back to log-domain quadrature and may be overridden by closed forms.
    """

    kind = "piece"
    lo: float
    hi: float

    # -- pointwise ---------------------------------------------------------
    def log_value(self, x):
        raise NotImplementedError

    def dlog(self, x):
        raise NotImplementedError

    def log_abs_minus_one(self, x):
        return log_abs_diff(self.log_value(x), 0.0)

    def breakpoints(self) -> tuple:
        return ()

    # -- quadrature helpers -----------------------------------------------
    def _quad(self, logfun, a=None, b=None, cfg: QuadratureConfig = DEFAULT_CONFIG) -> LogValue:
        a = self.lo if a is None else a
        b = self.hi if b is None else b
        return log_integrate(logfun, a, b, cfg, breakpoints=self.breakpoints())

    # -- masses ------------------------------------------------------------
    def mass_between(self, a, b):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        a, b = np.broadcast_arrays(a, b)
        out = np.array([
            float(self._quad(lambda x: self.log_value(x) + std_normal_logpdf(x), ai, bi))
            for ai, bi in zip(a, b)
        ])
        return out

    def total_mass(self) -> float:
        return float(self.mass_between(self.lo, self.hi)[0])

    def upper_mass(self, x):
        return self.mass_between(x, self.hi)

    def lower_mass(self, x):
        return self.mass_between(self.lo, x)

    def _bisect(self, target, fn, increasing: bool):
        target = np.atleast_1d(np.asarray(target, dtype=float))
        lo = np.full(target.shape, self.lo, dtype=float)
        hi = np.full(target.shape, self.hi, dtype=float)
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise NotImplementedError("bisection inversion needs a finite piece")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            val = fn(mid)
            go_right = (val < target) if increasing else (val > target)
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
        return 0.5 * (lo + hi)

    def inv_lower(self, m):
        """x with lower_mass(x) = m."""
        return self._bisect(m, self.lower_mass, increasing=True)

    def inv_upper(self, m):
        """x with upper_mass(x) = m."""
        return self._bisect(m, self.upper_mass, increasing=False)

    # -- integrals for the functionals ------------------------------------
    def excess(self, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
        """int (f_tilde - 1) dgamma over the piece."""
        def logfun(x):
            la, sg = self.log_abs_minus_one(x)
            return la + std_normal_logpdf(x), sg
        return float(self._quad(logfun, cfg=cfg))

    def fisher(self, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
        """int f_tilde'^2 / f_tilde dgamma over the piece."""
        def logfun(x):
            with np.errstate(divide="ignore"):
                return 2.0 * np.log(np.abs(self.dlog(x))) + self.log_value(x) + std_normal_logpdf(x)
        return float(self._quad(logfun, cfg=cfg))

    def entropy(self, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
        """int f_tilde log f_tilde dgamma over the piece."""
        def logfun(x):
            lv = self.log_value(x)
            with np.errstate(divide="ignore"):
                return np.log(np.abs(lv)) + lv + std_normal_logpdf(x), np.sign(lv)
        return float(self._quad(logfun, cfg=cfg))

    def deficit_part(self, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
        """fisher/2 - entropy; summed over pieces it gives ||f_tilde|| * (delta - log||f_tilde||)."""
        return 0.5 * self.fisher(cfg) - self.entropy(cfg)

    def abs_moment(self, p: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
        """int |x|^p f_tilde dgamma over the piece."""
        if p == 0:
            return self.total_mass()

        def logfun(x):
            with np.errstate(divide="ignore"):
                return p * np.log(np.abs(x)) + self.log_value(x) + std_normal_logpdf(x)
        return float(self._quad(logfun, cfg=cfg))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExpTilt(Piece):
    """f_tilde(x) = r * exp(b x - b^2/2) on [lo, hi]; stored through log r."""

    log_r: float
    b: float
    lo: float
    hi: float
    kind = "exp_tilt"

    @property
    def r(self) -> float:
        return math.exp(self.log_r)

    def log_value(self, x):
        x = np.asarray(x, dtype=float)
        return self.log_r + self.b * x - 0.5 * self.b * self.b

    def dlog(self, x):
        return np.full(np.shape(x), self.b, dtype=float)

    # y = x - b turns every integral into one against the plain Gaussian
    @property
    def _ylo(self):
        return self.lo - self.b

    @property
    def _yhi(self):
        return self.hi - self.b

    def log_mass_between(self, a, b):
        return self.log_r + log_gauss_mass(np.asarray(a) - self.b, np.asarray(b) - self.b)

    def mass_between(self, a, b):
        with np.errstate(over="ignore"):
            return np.exp(np.atleast_1d(self.log_mass_between(a, b)))

    def total_mass(self) -> float:
        return float(np.exp(self.log_mass_between(self.lo, self.hi)))

    def inv_lower(self, m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        with np.errstate(divide="ignore", over="ignore"):
            log_rel = np.log(m) - self.log_r
            rel = np.exp(log_rel)
            p = special.ndtr(self._ylo) + rel
            y_direct = -gauss_isf_log(np.minimum(np.logaddexp(log_complement(-self._ylo), log_rel), 0.0))
        # upper-tail form when the target sits past the median
        tot_rel = math.exp(float(log_gauss_mass(self._ylo, self._yhi)))
        q = special.ndtr(-self._yhi) + (tot_rel - rel)
        y_upper = gauss_isf(np.clip(q, 0.0, 1.0))
        y = np.where(p < 0.5, y_direct, y_upper)
        return np.clip(y + self.b, self.lo, self.hi)

    def inv_upper(self, m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        with np.errstate(divide="ignore", over="ignore"):
            log_rel = np.log(m) - self.log_r
            rel = np.exp(log_rel)
            q = special.ndtr(-self._yhi) + rel
            y_direct = gauss_isf_log(np.minimum(np.logaddexp(log_complement(self._yhi), log_rel), 0.0))
        tot_rel = math.exp(float(log_gauss_mass(self._ylo, self._yhi)))
        p = special.ndtr(self._ylo) + (tot_rel - rel)
        y_lower = _ppf_from_lower(np.clip(p, 0.0, 1.0))
        y = np.where(q < 0.5, y_direct, y_lower)
        return np.clip(y + self.b, self.lo, self.hi)

    def _gamma_edges(self) -> float:
        # gamma(y_lo) - gamma(y_hi)
        g = lambda y: 0.0 if not math.isfinite(y) else math.exp(float(std_normal_logpdf(y)))
        return g(self._ylo) - g(self._yhi)

    def excess(self, cfg=DEFAULT_CONFIG) -> float:
        lm = float(log_gauss_mass(self._ylo, self._yhi))
        return math.exp(self.log_r + lm) - gauss_mass(self.lo, self.hi)

    def fisher(self, cfg=DEFAULT_CONFIG) -> float:
        if self.b == 0:
            return 0.0
        return self.b * self.b * math.exp(self.log_r + float(log_gauss_mass(self._ylo, self._yhi)))

    def entropy(self, cfg=DEFAULT_CONFIG) -> float:
        lm = float(log_gauss_mass(self._ylo, self._yhi))
        mass = math.exp(self.log_r + lm)
        out = (self.log_r + 0.5 * self.b * self.b) * mass
        if self.b != 0:
            out += self.b * math.exp(self.log_r) * self._gamma_edges()
        return out

    def deficit_part(self, cfg=DEFAULT_CONFIG) -> float:
        # b^2 terms of fisher/2 and entropy cancel exactly
        lm = float(log_gauss_mass(self._ylo, self._yhi))
        out = -self.log_r * math.exp(self.log_r + lm)
        if self.b != 0:
            out -= self.b * math.exp(self.log_r) * self._gamma_edges()
        return out

    def _signed_poly_moment(self, p: int, lo: float, hi: float) -> float:
        """int_lo^hi x^p gamma(x - b) dx by the binomial expansion."""
        ylo, yhi = lo - self.b, hi - self.b
        total = 0.0
        for j in range(p + 1):
            mj = float(incomplete_gaussian_moment(j, ylo)) - float(incomplete_gaussian_moment(j, yhi))
            total += math.comb(p, j) * self.b ** (p - j) * mj
        return total

    def abs_moment(self, p: float, cfg=DEFAULT_CONFIG) -> float:
        if p == 0:
            return self.total_mass()
        if self.b == 0:
            return math.exp(self.log_r) * abs_moment_between(p, self.lo, self.hi)
        if float(p) == int(p):
            p = int(p)
            total = 0.0
            if self.lo < 0:
                total += (-1) ** p * self._signed_poly_moment(p, self.lo, min(self.hi, 0.0))
            if self.hi > 0:
                total += self._signed_poly_moment(p, max(self.lo, 0.0), self.hi)
            return math.exp(self.log_r) * total
        return super().abs_moment(p, cfg)

    def breakpoints(self) -> tuple:
        return (0.0,) if self.lo < 0 < self.hi else ()

    def to_dict(self) -> dict:
        return {"type": "ExpTilt", "interval": [self.lo, self.hi], "log_r": self.log_r, "b": self.b}


class Flat(ExpTilt):
    """f_tilde(x) = v on [lo, hi]; an exponential tilt with b = 0."""

    kind = "flat"

    def __init__(self, log_v: float, lo: float, hi: float):
        super().__init__(log_v, 0.0, lo, hi)

    @classmethod
    def of_value(cls, v: float, lo: float, hi: float) -> "Flat":
        return cls(math.log(v), lo, hi)

    def log_abs_minus_one(self, x):
        la, sg = log_abs_diff(np.full(np.shape(x), self.log_r), 0.0)
        return la, sg

    def to_dict(self) -> dict:
        return {"type": "Flat", "interval": [self.lo, self.hi], "log_value": self.log_r}


@dataclass(frozen=True)
class BridgeSpec:
    """Monotone connection from value 1 at ``left`` to ``r`` at ``right``.

    ``shape`` selects the value-space smoothstep: ``"quintic"`` is
    u^3 (10 - 15u + 6u^2), ``"cubic"`` is u^2 (3 - 2u).
    """

    left: float
    right: float
    r: float
    shape: str = "quintic"

    def __post_init__(self):
        if self.shape not in ("quintic", "cubic"):
            raise ValueError(f"unknown bridge shape {self.shape!r}")
        if not (0 < self.r <= 1) or not self.right > self.left:
            raise ValueError("bridge needs 0 < r <= 1 and right > left")

    @property
    def width(self) -> float:
        return self.right - self.left

    def _u(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.left) / self.width, 0.0, 1.0)

    def step(self, u):
        if self.shape == "quintic":
            return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
        return u * u * (3.0 - 2.0 * u)

    def dstep(self, u):
        if self.shape == "quintic":
            return 30.0 * u * u * (1.0 - u) ** 2
        return 6.0 * u * (1.0 - u)

    def max_slope(self) -> float:
        peak = 15.0 / 8.0 if self.shape == "quintic" else 1.5
        return peak * (1.0 - self.r) / self.width

    def value(self, x):
        # evaluate from the nearer endpoint so both end values are exact
        u = self._u(x)
        s = self.step(u)
        return np.where(u < 0.5, 1.0 - (1.0 - self.r) * s, self.r + (1.0 - self.r) * (1.0 - s))

    def derivative(self, x):
        return -(1.0 - self.r) * self.dstep(self._u(x)) / self.width

    def to_dict(self) -> dict:
        return {"left": self.left, "right": self.right, "r": self.r, "shape": self.shape}


@dataclass(frozen=True)
class Bridge(Piece):
    spec: BridgeSpec
    kind = "bridge"

    @property
    def lo(self):
        return self.spec.left

    @property
    def hi(self):
        return self.spec.right

    def log_value(self, x):
        return np.log(self.spec.value(x))

    def dlog(self, x):
        return self.spec.derivative(x) / self.spec.value(x)

    def log_abs_minus_one(self, x):
        # L - 1 = -(1 - r) * step(u): no cancellation
        s = self.spec.step(self.spec._u(x))
        with np.errstate(divide="ignore"):
            la = math.log1p(-self.spec.r) + np.log(s) if self.spec.r < 1 else np.full(np.shape(x), -np.inf)
        return la, -np.sign(s)

    def _gl_mass(self, a, b):
        a = np.atleast_1d(np.asarray(a, dtype=float))[:, None]
        b = np.atleast_1d(np.asarray(b, dtype=float))[:, None]
        half = 0.5 * (b - a)
        x = 0.5 * (a + b) + half * _GL_X[None, :]
        with np.errstate(under="ignore"):
            vals = self.spec.value(x) * np.exp(std_normal_logpdf(x))
        return (half[:, 0] * (vals @ _GL_W))

    def mass_between(self, a, b):
        a, b = np.broadcast_arrays(np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float)))
        return self._gl_mass(a, b)

    def total_mass(self) -> float:
        return float(self._gl_mass(self.lo, self.hi)[0])

    def to_dict(self) -> dict:
        return {"type": "Bridge", "interval": [self.lo, self.hi], **{"spec": self.spec.to_dict()}}


@dataclass(frozen=True)
class Rational(Piece):
    """f_tilde(x) = sqrt(2 pi) e^{x^2/2} / (pi (1 + x^2)), i.e. f_tilde dgamma = dx / (pi (1 + x^2))."""

    lo: float
    hi: float
    kind = "rational"

    def log_value(self, x):
        x = np.asarray(x, dtype=float)
        return LOG_SQRT_2PI + 0.5 * x * x - math.log(math.pi) - np.log1p(x * x)

    def dlog(self, x):
        x = np.asarray(x, dtype=float)
        return x - 2.0 * x / (1.0 + x * x)

    def mass_between(self, a, b):
        a, b = np.broadcast_arrays(np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float)))
        return (np.arctan(b) - np.arctan(a)) / math.pi

    def total_mass(self) -> float:
        return float((math.atan(self.hi) - math.atan(self.lo)) / math.pi)

    def inv_lower(self, m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        return np.clip(np.tan(math.atan(self.lo) + math.pi * m), self.lo, self.hi)

    def inv_upper(self, m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        return np.clip(np.tan(math.atan(self.hi) - math.pi * m), self.lo, self.hi)

    def _unbounded(self) -> bool:
        return math.isinf(self.hi) or math.isinf(self.lo)

    # on an infinite range the integrands tend to 1/pi and log(x)/pi: both diverge
    def fisher(self, cfg=DEFAULT_CONFIG) -> float:
        return math.inf if self._unbounded() else super().fisher(cfg)

    def entropy(self, cfg=DEFAULT_CONFIG) -> float:
        return math.inf if self._unbounded() else super().entropy(cfg)

    def deficit_part(self, cfg=DEFAULT_CONFIG) -> float:
        return math.nan if self._unbounded() else super().deficit_part(cfg)

    def abs_moment(self, p: float, cfg=DEFAULT_CONFIG) -> float:
        if p >= 1 and (math.isinf(self.hi) or math.isinf(self.lo)):
            raise DivergentMoment(f"moment of order {p} diverges on a Cauchy-type tail")
        return super().abs_moment(p, cfg)

    def to_dict(self) -> dict:
        return {"type": "Rational", "interval": [self.lo, self.hi]}


@dataclass(frozen=True)
class GenericGrid(Piece):
    """log f_tilde given on a grid, linearly interpolated."""

    xs: tuple
    log_values: tuple
    kind = "generic_grid"

    def __post_init__(self):
        if len(self.xs) < 2 or len(self.xs) != len(self.log_values):
            raise ValueError("GenericGrid needs matching xs/log_values of length >= 2")
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("GenericGrid xs must be strictly increasing")

    @property
    def lo(self):
        return float(self.xs[0])

    @property
    def hi(self):
        return float(self.xs[-1])

    def log_value(self, x):
        return np.interp(x, self.xs, self.log_values)

    def dlog(self, x):
        xs = np.asarray(self.xs)
        slopes = np.diff(self.log_values) / np.diff(xs)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    def breakpoints(self) -> tuple:
        return tuple(self.xs[1:-1]) if len(self.xs) <= 64 else ()

    def to_dict(self) -> dict:
        return {"type": "GenericGrid", "interval": [self.lo, self.hi],
                "xs": list(self.xs), "log_values": list(self.log_values)}


@dataclass(frozen=True)
class Mirrored(Piece):
    """x -> -x image of a piece living on the non-negative half-line."""

    base: Piece
    kind = "mirrored"

    @property
    def lo(self):
        return -self.base.hi

    @property
    def hi(self):
        return -self.base.lo

    def log_value(self, x):
        return self.base.log_value(-np.asarray(x, dtype=float))

    def dlog(self, x):
        return -self.base.dlog(-np.asarray(x, dtype=float))

    def log_abs_minus_one(self, x):
        return self.base.log_abs_minus_one(-np.asarray(x, dtype=float))

    def mass_between(self, a, b):
        return self.base.mass_between(-np.asarray(b, dtype=float), -np.asarray(a, dtype=float))

    def total_mass(self) -> float:
        return self.base.total_mass()

    def upper_mass(self, x):
        return self.base.lower_mass(-np.asarray(x, dtype=float))

    def lower_mass(self, x):
        return self.base.upper_mass(-np.asarray(x, dtype=float))

    def inv_lower(self, m):
        return -self.base.inv_upper(m)

    def inv_upper(self, m):
        return -self.base.inv_lower(m)

    def to_dict(self) -> dict:
        return {"type": "Mirrored", "base": self.base.to_dict()}


# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpParams:
    s: float
    t: float
    k: float
    d: float
    b: float
    r: float
    c: float
    bridge: BridgeSpec

    def to_dict(self) -> dict:
        return {"s": self.s, "t": self.t, "k": self.k, "d_k": self.d, "b_k": self.b,
                "r_k": self.r, "c_k": self.c, "bridge": self.bridge.to_dict()}


@dataclass(frozen=True)
class HeavyTailParams:
    k: float
    C: float
    C_literal: float

    def to_dict(self) -> dict:
        return {"k": self.k, "C_k": self.C, "C_k_literal": self.C_literal}


@dataclass(frozen=True)
class PiecewiseLogDensity:
    """f = f_tilde / ||f_tilde||_{L^1(dgamma)} with f_tilde given by ``pieces``.

    With ``symmetric`` the pieces partition [0, inf) and f is extended
    evenly; otherwise they partition the real line.
    """

    pieces: tuple
    symmetric: bool
    name: str = "density"
    params: Optional[object] = None
    norm_minus_one: float = field(default=math.nan)

    def __post_init__(self):
        pcs = self.pieces
        if not pcs:
            raise ValueError("density needs at least one piece")
        start = 0.0 if self.symmetric else -math.inf
        if pcs[0].lo != start or pcs[-1].hi != math.inf:
            raise ValueError(f"pieces must cover [{start}, inf)")
        for left, right in zip(pcs[:-1], pcs[1:]):
            if left.hi != right.lo:
                raise ValueError(f"gap/overlap between pieces at {left.hi} / {right.lo}")
        if math.isnan(self.norm_minus_one):
            factor = 2.0 if self.symmetric else 1.0
            object.__setattr__(self, "norm_minus_one", factor * math.fsum(p.excess() for p in pcs))

    # normalisation -----------------------------------------------------------
    @property
    def norm(self) -> float:
        """||f_tilde||_{L^1(dgamma)}."""
        return 1.0 + self.norm_minus_one

    @property
    def log_norm(self) -> float:
        return math.log1p(self.norm_minus_one)

    @property
    def scale(self) -> float:
        """c = 1 / ||f_tilde||."""
        return 1.0 / self.norm

    @property
    def half_factor(self) -> float:
        return 2.0 if self.symmetric else 1.0

    def full_pieces(self) -> list:
        """Pieces covering the whole line, left to right."""
        if not self.symmetric:
            return list(self.pieces)
        left = [Mirrored(p) for p in reversed(self.pieces)]
        return left + list(self.pieces)

    def piece_boundaries(self) -> list:
        return sorted({p.lo for p in self.full_pieces()[1:]})

    # pointwise ---------------------------------------------------------------
    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        z = np.abs(x) if self.symmetric else x
        edges = np.array([p.hi for p in self.pieces[:-1]])
        # right-closed pieces: (lo, hi]
        idx = np.searchsorted(edges, z, side="left")
        return z, idx

    def log_tilde(self, x):
        z, idx = self._locate(x)
        out = np.empty(np.shape(z), dtype=float)
        for i, piece in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = piece.log_value(z[sel])
        return out

    def log_eval(self, x):
        """log f(x), vectorised."""
        return self.log_tilde(x) - self.log_norm

    def dlog_eval(self, x):
        """(log f)'(x), one-sided from the piece containing x."""
        z, idx = self._locate(x)
        out = np.empty(np.shape(z), dtype=float)
        for i, piece in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = piece.dlog(z[sel])
        if self.symmetric:
            out = out * np.sign(np.asarray(x, dtype=float))
        return out

    def evaluate(self, x: float) -> LogValue:
        return LogValue(float(self.log_eval(np.array([x]))[0]), 1)

    def __call__(self, x):
        return np.exp(self.log_eval(x))

    # serialisation -------------------------------------------------------------
    def to_dict(self) -> dict:
        params = self.params.to_dict() if self.params is not None else None
        return {
            "name": self.name,
            "symmetric": self.symmetric,
            "norm_minus_one": self.norm_minus_one,
            "params": params,
            "pieces": [p.to_dict() for p in self.pieces],
        }

    def to_json(self) -> str:
        return dumps_json(self.to_dict(), indent=0)


def _piece_from_dict(d: dict) -> Piece:
    kind = d["type"]
    lo, hi = (float(v) for v in d.get("interval", (0.0, 0.0)))
    if kind == "Flat":
        return Flat(float(d["log_value"]), lo, hi)
    if kind == "ExpTilt":
        return ExpTilt(float(d["log_r"]), float(d["b"]), lo, hi)
    if kind == "Bridge":
        return Bridge(BridgeSpec(**d["spec"]))
    if kind == "Rational":
        return Rational(lo, hi)
    if kind == "GenericGrid":
        return GenericGrid(tuple(d["xs"]), tuple(d["log_values"]))
    if kind == "Mirrored":
        return Mirrored(_piece_from_dict(d["base"]))
    raise ValueError(f"unknown piece type {kind!r}")


def density_from_dict(d: dict) -> PiecewiseLogDensity:
    pieces = tuple(_piece_from_dict(p) for p in d["pieces"])
    return PiecewiseLogDensity(pieces, bool(d["symmetric"]), d.get("name", "density"),
                               None, float(d["norm_minus_one"]))


# constructors -------------------------------------------------------------------

def bump_params(s: float, t: float, k: float, shape: str = "quintic") -> tuple:
    if not (s > 0 and t > 0):
        raise ValueError("bump family needs s > 0 and t > 0")
    if not k >= 2:
        raise ValueError(f"bump family needs k >= 2, got {k}")
    d = 1.0 / (2.0 * k)
    b = 2.0 * k
    r = 0.25 * min(s * k ** (-t), 1.0)
    return d, b, r, BridgeSpec(k - d, float(k), r, shape)


def make_bump_family(s: float, t: float, k: float, bridge_shape: str = "quintic") -> PiecewiseLogDensity:
    """Flat core, smooth bridge of width 1/(2k), tilt r_k e^{2k x - 2k^2} past k.

    The returned density carries its :class:`BumpParams` as ``.params``.
    """
    d, b, r, spec = bump_params(s, t, k, bridge_shape)
    pieces = (
        Flat(0.0, 0.0, k - d),
        Bridge(spec),
        ExpTilt(math.log(r), b, float(k), math.inf),
    )
    dens = PiecewiseLogDensity(pieces, True, f"bump(s={s:g},t={t:g},k={k:g})")
    params = BumpParams(s, t, float(k), d, b, r, dens.scale, spec)
    object.__setattr__(dens, "params", params)
    return dens


def make_shifted_gaussian(b: float) -> PiecewiseLogDensity:
    """g_b(x) = exp(b x - b^2/2): the density of N(b, 1) w.r.t. gamma."""
    if not math.isfinite(b):
        raise ValueError("b must be finite")
    piece = ExpTilt(0.0, float(b), -math.inf, math.inf)
    return PiecewiseLogDensity((piece,), False, f"g_b(b={b:g})", None, 0.0)


def make_standard_gaussian() -> PiecewiseLogDensity:
    return PiecewiseLogDensity((Flat(0.0, 0.0, math.inf),), True, "gamma", None, 0.0)


def heavytail_constant(k: float) -> tuple:
    """(C_k normalising f_k dgamma, C_k as printed with the sqrt(2 pi) factor dropped)."""
    if k == math.inf:
        return 1.0, 1.0
    mills = math.exp(float(log_mills_ratio(k)))           # sqrt(2pi) e^{k^2/2} (1 - Phi(k))
    c = (2.0 / math.pi) * (math.atan(k) + mills / (k * k + 1.0))
    literal_tail = math.exp(0.5 * k * k + float(log_complement(k))) / (k * k + 1.0)
    c_lit = (2.0 / math.pi) * (math.atan(k) + literal_tail)
    return c, c_lit


def make_heavytail_family(k: float) -> PiecewiseLogDensity:
    """f_k dgamma = dx / (C_k pi (1 + x^2)) on [-k, k], flat continuation beyond.

    ``k = inf`` gives the Cauchy limit, whose moments of order >= 1 diverge.
    """
    if not k >= 1:
        raise ValueError(f"heavy-tail family needs k >= 1, got {k}")
    C, C_lit = heavytail_constant(k)
    if k == math.inf:
        pieces = (Rational(0.0, math.inf),)
    else:
        rat = Rational(0.0, float(k))
        tail_log = float(rat.log_value(np.array([k]))[0])
        pieces = (rat, Flat(tail_log, float(k), math.inf))
    # f_tilde already integrates to C_k, so norm - 1 = C_k - 1
    dens = PiecewiseLogDensity(pieces, True, f"heavytail(k={k:g})", HeavyTailParams(float(k), C, C_lit), C - 1.0)
    return dens


def evaluate(density: PiecewiseLogDensity, x: float) -> LogValue:
    return density.evaluate(x)

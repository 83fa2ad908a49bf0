"""Brute-force scipy oracles, independent of the package's closed forms."""

import math

import numpy as np
from scipy import integrate, stats


def _pdf(x):
    return stats.norm.pdf(x)


def gauss_quad(func, f, lo=-80.0, hi=80.0, extra=()):
    """int func(x) dgamma over [lo, hi], split at the density's piece boundaries.

    ``func`` may return a (value, log_scale) pair; the scale is combined with the
    Gaussian weight before exponentiating so tilted tails do not overflow.
    """
    pts = sorted({lo, hi, *[p for p in f.piece_boundaries() if lo < p < hi], *[p for p in extra if lo < p < hi]})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda x: _weighted(func, x), a, b, epsabs=1e-15, epsrel=1e-12, limit=400)
        total += val
    return total


def _weighted(func, x):
    out = func(x)
    if isinstance(out, tuple):
        v, ls = out
        return v * math.exp(ls + stats.norm.logpdf(x)) if v != 0 else 0.0
    return out * _pdf(x)


def _scalar(fn):
    return lambda x: float(fn(np.array([x]))[0])


def _logf(f):
    lf = _scalar(f.log_eval)
    return lf


def mass(f, **kw):
    lf = _logf(f)
    return gauss_quad(lambda x: (1.0, lf(x)), f, **kw)


def fisher(f, **kw):
    dl, lf = _scalar(f.dlog_eval), _logf(f)
    return gauss_quad(lambda x: (dl(x) ** 2, lf(x)), f, **kw)


def entropy(f, **kw):
    lf = _logf(f)
    return gauss_quad(lambda x: (lf(x), lf(x)), f, **kw)


def moment(f, p, **kw):
    lf = _logf(f)
    return gauss_quad(lambda x: (abs(x) ** p, lf(x)), f, extra=(0.0,), **kw)


def lp_dist(f, p, **kw):
    lf = _logf(f)

    def term(x):
        v = lf(x)
        if v <= 0:
            return (abs(math.expm1(v)) ** p, 0.0)
        return (1.0, p * (v + math.log(-math.expm1(-v))))
    return gauss_quad(term, f, **kw) ** (1.0 / p)

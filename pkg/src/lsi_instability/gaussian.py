"""Scalar special functions for the 1-D standard Gaussian measure."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .logvalue import LogValue

__all__ = [
    "LOG_SQRT_2PI",
    "std_normal_pdf",
    "std_normal_logpdf",
    "std_normal_pdf_log",
    "std_normal_cdf",
    "std_normal_sf",
    "log_complement",
    "log_cdf",
    "mills_ratio",
    "gauss_mass",
    "gauss_isf",
    "gauss_isf_log",
    "gauss_ppf",
    "gaussian_moment",
    "incomplete_gaussian_moment",
    "incomplete_gaussian_moment_float",
    "abs_moment_between",
]

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
MILLS_SWITCH = 8.0


def std_normal_logpdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def std_normal_pdf(x):
    out = np.exp(std_normal_logpdf(x))
    return float(out) if np.ndim(out) == 0 else out


def std_normal_pdf_log(x: float) -> LogValue:
    return LogValue(float(std_normal_logpdf(x)), 1)


def std_normal_cdf(x):
    out = special.ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def std_normal_sf(x):
    out = special.ndtr(-np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _log_mills_asymptotic(x: np.ndarray) -> np.ndarray:
    # (1 - Phi(x)) / gamma(x) ~ (1/x) * sum_n (-1)^n (2n-1)!! / x^{2n}
    # summed until the terms stop shrinking; error is below the smallest term.
    inv2 = 1.0 / (x * x)
    total = np.ones_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for n in range(1, 200):
        nxt = -term * (2 * n - 1) * inv2
        grow = np.abs(nxt) >= np.abs(term)
        active &= ~grow
        small = np.abs(nxt) < 1e-17 * np.abs(total)
        total = np.where(active, total + nxt, total)
        term = np.where(active, nxt, term)
        active &= ~small
        if not active.any():
            break
    return np.log(total) - np.log(x)


def log_mills_ratio(x):
    """log((1 - Phi(x)) / gamma(x))."""
    x = np.asarray(x, dtype=float)
    big = x > MILLS_SWITCH
    out = np.empty_like(x)
    if big.any():
        out[big] = _log_mills_asymptotic(x[big])
    if (~big).any():
        xs = x[~big]
        out[~big] = special.log_ndtr(-xs) - std_normal_logpdf(xs)
    return out


def mills_ratio(x):
    out = np.exp(log_mills_ratio(x))
    return float(out) if np.ndim(out) == 0 else out


def log_complement(x):
    """log(1 - Phi(x)), accurate far into the upper tail."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > MILLS_SWITCH
    if big.any():
        xb = x[big]
        out[big] = std_normal_logpdf(xb) + _log_mills_asymptotic(xb)
    if (~big).any():
        out[~big] = special.log_ndtr(-x[~big])
    return float(out) if out.ndim == 0 else out


def log_cdf(x):
    """log Phi(x)."""
    return log_complement(-np.asarray(x, dtype=float))


def gauss_mass(a, b):
    """Phi(b) - Phi(a) for a <= b, without cancellation in either tail."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = a > 0
    out = np.where(upper, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))
    return float(out) if out.ndim == 0 else out


def gauss_isf(q):
    """x with 1 - Phi(x) = q."""
    q = np.asarray(q, dtype=float)
    out = np.where(q < 0.5, -special.ndtri(q), special.ndtri(1.0 - q))
    return float(out) if out.ndim == 0 else out


def gauss_isf_log(log_q):
    """x with log(1 - Phi(x)) = log_q; stays finite when q underflows."""
    lq = np.asarray(log_q, dtype=float)
    out = np.asarray(gauss_isf(np.exp(np.minimum(lq, 0.0))), dtype=float).copy()
    deep = lq < -600.0
    if np.any(deep):
        l = lq[deep]
        x = np.sqrt(-2.0 * l - np.log(-4.0 * math.pi * l))
        for _ in range(6):
            # d/dx log(1 - Phi) = -1 / mills ratio
            x = x + (np.asarray(log_complement(x)) - l) * np.exp(np.asarray(log_mills_ratio(x)))
        out[deep] = x
    return float(out) if out.ndim == 0 else out


def gauss_ppf(u):
    """x with Phi(x) = u."""
    return -np.asarray(gauss_isf(u))


def gaussian_moment(p: float) -> float:
    """m_p(gamma) = E|X|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)."""
    if p < 0:
        raise ValueError(f"moment order must be >= 0, got {p}")
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1)) - 0.5 * math.log(math.pi))


def incomplete_gaussian_moment(p: int, a: float) -> LogValue:
    """int_a^inf x^p dgamma via M_p = a^{p-1} gamma(a) + (p-1) M_{p-2}.

    Returned in log form; it stays representable for ``a`` far in the tail.
    """
    if int(p) != p or p < 0:
        raise ValueError(f"p must be a non-negative integer, got {p}")
    p = int(p)
    if a == math.inf:
        return LogValue.zero()
    if a == -math.inf:
        if p % 2:
            return LogValue.zero()
        return LogValue.from_float(gaussian_moment(p))
    log_g = float(std_normal_logpdf(a))
    m_prev = LogValue(float(log_complement(a)), 1)      # M_0
    m_cur = LogValue(log_g, 1)                          # M_1
    if p == 0:
        return m_prev
    for j in range(2, p + 1):
        head = LogValue.from_float(a ** (j - 1)) * LogValue(log_g, 1) if a != 0 else LogValue.zero()
        m_next = head + m_prev * (j - 1)
        m_prev, m_cur = m_cur, m_next
    return m_cur


def incomplete_gaussian_moment_float(p: int, a: float) -> float:
    return float(incomplete_gaussian_moment(p, a))


def abs_moment_between(p: float, a: float, b: float) -> float:
    """int_a^b |x|^p dgamma for any real p >= 0 (closed form via incomplete gamma)."""
    if a >= b:
        return 0.0
    if a < 0 < b:
        return abs_moment_between(p, a, 0.0) + abs_moment_between(p, 0.0, b)
    if b <= 0:
        a, b = -b, -a
    # now 0 <= a < b; int_a^b x^p dgamma = C * [Q(s, a^2/2) - Q(s, b^2/2)], s = (p+1)/2
    s = 0.5 * (p + 1)
    half = 0.5 * gaussian_moment(p)
    if b == math.inf:
        return half * float(special.gammaincc(s, 0.5 * a * a))
    if a == 0:
        return half * float(special.gammainc(s, 0.5 * b * b))
    lo, hi = 0.5 * a * a, 0.5 * b * b
    if lo > s:
        return half * float(special.gammaincc(s, lo) - special.gammaincc(s, hi))
    return half * float(special.gammainc(s, hi) - special.gammainc(s, lo))

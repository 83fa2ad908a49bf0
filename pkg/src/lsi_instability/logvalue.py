"""Signed log-domain scalars.

Quantities such as ``gamma(k - d_k)`` or weighted norms of ``h_k`` leave the
range of IEEE doubles long before the interesting regime ends, so they are
carried around as ``sign * exp(log_abs)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["LogValue", "log_add", "log_sub", "log_abs_diff"]


@dataclass(frozen=True)
class LogValue:
    log_abs: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if math.isnan(self.log_abs):
            raise ValueError("log_abs is NaN")
        if (self.sign == 0) != (self.log_abs == -math.inf):
            # normalise the two spellings of zero
            object.__setattr__(self, "sign", 0)
            object.__setattr__(self, "log_abs", -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "LogValue":
        if x == 0:
            return cls.zero()
        if not math.isfinite(x):
            raise ValueError(f"cannot represent {x} as LogValue")
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    @classmethod
    def from_log(cls, log_abs: float, sign: int = 1) -> "LogValue":
        return cls(float(log_abs), sign)

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(-math.inf, 0)

    @classmethod
    def one(cls) -> "LogValue":
        return cls(0.0, 1)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_abs > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_abs)

    def to_float(self) -> float:
        return float(self)

    def log(self) -> float:
        """Natural log of a positive value."""
        if self.sign != 1:
            raise ValueError("log of a non-positive LogValue")
        return self.log_abs

    def __neg__(self) -> "LogValue":
        return LogValue(self.log_abs, -self.sign)

    def __abs__(self) -> "LogValue":
        return LogValue(self.log_abs, abs(self.sign))

    def _coerce(self, other) -> "LogValue":
        if isinstance(other, LogValue):
            return other
        return LogValue.from_float(float(other))

    def __mul__(self, other) -> "LogValue":
        other = self._coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.log_abs + other.log_abs, self.sign * other.sign)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogValue":
        other = self._coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("LogValue division by zero")
        if self.sign == 0:
            return LogValue.zero()
        return LogValue(self.log_abs - other.log_abs, self.sign * other.sign)

    def __rtruediv__(self, other) -> "LogValue":
        return self._coerce(other) / self

    def __add__(self, other) -> "LogValue":
        other = self._coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        big, small = (self, other) if self.log_abs >= other.log_abs else (other, self)
        gap = small.log_abs - big.log_abs  # <= 0
        if big.sign == small.sign:
            return LogValue(big.log_abs + math.log1p(math.exp(gap)), big.sign)
        if gap == 0.0:
            return LogValue.zero()
        return LogValue(big.log_abs + math.log1p(-math.exp(gap)), big.sign)

    __radd__ = __add__

    def __sub__(self, other) -> "LogValue":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "LogValue":
        return self._coerce(other) - self

    def __pow__(self, power: float) -> "LogValue":
        if self.sign == 0:
            if power > 0:
                return LogValue.zero()
            raise ZeroDivisionError("0 ** non-positive power")
        if self.sign < 0 and float(power) != int(power):
            raise ValueError("fractional power of a negative LogValue")
        sign = 1 if self.sign > 0 or int(power) % 2 == 0 else -1
        return LogValue(self.log_abs * power, sign)

    def __lt__(self, other) -> bool:
        return (self - self._coerce(other)).sign < 0

    def __le__(self, other) -> bool:
        return (self - self._coerce(other)).sign <= 0

    def __gt__(self, other) -> bool:
        return (self - self._coerce(other)).sign > 0

    def __ge__(self, other) -> bool:
        return (self - self._coerce(other)).sign >= 0

    def to_dict(self) -> dict:
        return {"log_abs": self.log_abs, "sign": self.sign}

    def __repr__(self) -> str:
        return f"LogValue(log_abs={self.log_abs!r}, sign={self.sign})"


# vectorised helpers -----------------------------------------------------------

def log_add(a, b):
    """log(e^a + e^b), elementwise."""
    return np.logaddexp(a, b)


def log_sub(a, b):
    """log(e^a - e^b) for a >= b, elementwise; -inf where a == b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a + np.log(-np.expm1(b - a))
    return np.where(b == -np.inf, a, out)


def log_abs_diff(a, b):
    """(log|e^a - e^b|, sign(e^a - e^b)), elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    sign = np.sign(a - b)
    sign = np.where(np.isneginf(a) & np.isneginf(b), 0.0, sign)
    return log_sub(hi, lo), sign

"""Extended-real arithmetic, tolerance policy and deterministic sampling.

Values live in [-inf, +inf].  NaN is banned at every type boundary: any
operation that would produce one raises immediately instead of letting it
propagate into an inequality check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Union

import numpy as np

from .errors import IndeterminateSum, NanError, NegativeCoefficient, ParamOutOfRange

Number = Union["ExtReal", float, int]


@total_ordering
@dataclass(frozen=True)
class ExtReal:
    """A number in [-inf, +inf].  Total order, no NaN representable."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise NanError("ExtReal cannot hold NaN")
        object.__setattr__(self, "value", v)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    @property
    def is_pos_inf(self) -> bool:
        return self.value == math.inf

    @property
    def is_neg_inf(self) -> bool:
        return self.value == -math.inf

    def __float__(self) -> float:
        return self.value

    def __eq__(self, other):
        return self.value == _raw(other)

    def __lt__(self, other):
        return self.value < _raw(other)

    def __hash__(self):
        return hash(self.value)

    def __repr__(self):
        if self.is_pos_inf:
            return "ExtReal(+inf)"
        if self.is_neg_inf:
            return "ExtReal(-inf)"
        return f"ExtReal({self.value!r})"


POS_INF = ExtReal(math.inf)
NEG_INF = ExtReal(-math.inf)


def _raw(x: Number) -> float:
    if isinstance(x, ExtReal):
        return x.value
    v = float(x)
    if math.isnan(v):
        raise NanError("NaN is not a valid extended real")
    return v


def as_ext(x: Number) -> ExtReal:
    """Coerce a number to :class:`ExtReal`, rejecting NaN."""
    return x if isinstance(x, ExtReal) else ExtReal(float(x))


def ext_add(a: Number, b: Number) -> ExtReal:
    """Extended-real sum; (+inf) + (-inf) raises :class:`IndeterminateSum`."""
    x, y = _raw(a), _raw(b)
    if (x == math.inf and y == -math.inf) or (x == -math.inf and y == math.inf):
        raise IndeterminateSum("(+inf) + (-inf) is undefined")
    return ExtReal(x + y)


def ext_mul_conv(c: float, a: Number) -> ExtReal:
    """c * a for convexity combinations, with the convention 0 * inf = 0.

    c must be finite and >= 0; a must lie in [0, +inf].
    """
    c = float(c)
    if math.isnan(c) or not math.isfinite(c):
        raise ParamOutOfRange("coefficient must be finite")
    if c < 0:
        raise NegativeCoefficient(f"coefficient {c} < 0")
    x = _raw(a)
    if x < 0:
        raise ParamOutOfRange("value must lie in [0, +inf]")
    if c == 0.0:
        return ExtReal(0.0)
    return ExtReal(c * x)


def require_not_nan(x: float, where: str = "value") -> float:
    """NaN firewall used at internal boundaries."""
    if isinstance(x, np.ndarray):
        if np.isnan(x).any():
            raise NanError(f"NaN in {where}")
        return x
    if math.isnan(x):
        raise NanError(f"NaN in {where}")
    return x


@dataclass(frozen=True)
class Tolerance:
    """Absolute / relative slack plus the smallest finite-difference step.

    Defaults: abs = 1e-8, rel = 1e-6, h_min = 1e-6.  Differential checkers
    add an extra O(h)-aware budget on top of `abs`; see the analysis module.
    """

    abs: float = 1e-8
    rel: float = 1e-6
    h_min: float = 1e-6

    def __post_init__(self):
        if not (self.abs >= 0 and self.rel >= 0):
            raise ParamOutOfRange("abs and rel must be >= 0")
        if not self.h_min > 0:
            raise ParamOutOfRange("h_min must be > 0")


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class SampleSpec:
    """Seeded sample-size request.  Same seed + count => same samples."""

    seed: int
    count: int

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ParamOutOfRange("seed must fit in 64 unsigned bits")
        if int(self.count) <= 0:
            raise ParamOutOfRange("count must be positive")

    def rng(self) -> np.random.Generator:
        """A fresh generator; calling twice yields identical streams."""
        return np.random.default_rng(self.seed)

"""Unary bit-stream encodings and fully parallel unary arithmetic.

A unary stream carries its value in the number of ones it holds. Two
placements matter here: thermometer codes (ones packed at the low-index
end, the natural output of a flash ADC comparator bank) and rate patterns
(ones spread across the stream, fixed offline for hard-wired weights).

ANDing a thermometer code with a rate pattern of the same width gives a
constant unary multiplier; summing popcounts gives parallel unary addition.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


class UnaryRangeError(ValueError):
    """A level, count or width outside its legal range."""


class UnaryWidthError(ValueError):
    """Two streams that must share a width do not."""


def _as_bits(bits: Iterable[int]) -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise UnaryRangeError("stream bits must be 0 or 1")
    return out


@dataclass(frozen=True)
class UnaryStream:
    """Fixed-width bit vector; position 0 is the first bit."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", _as_bits(self.bits))

    @classmethod
    def from_string(cls, text: str) -> "UnaryStream":
        return cls(tuple(int(c) for c in text))

    @property
    def width(self) -> int:
        return len(self.bits)

    def popcount(self) -> int:
        return sum(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class ThermometerCode(UnaryStream):
    level: int = 0


@dataclass(frozen=True)
class RatePattern(UnaryStream):
    count: int = 0


def _check_level(value: int, width: int, what: str) -> None:
    if width < 1:
        raise UnaryRangeError(f"width must be >= 1, got {width}")
    if not 0 <= value <= width:
        raise UnaryRangeError(f"{what} {value} outside [0, {width}]")


def encode_thermometer(level: int, width: int) -> ThermometerCode:
    """Thermometer code with ``level`` ones at positions ``0..level-1``."""
    _check_level(level, width, "level")
    bits = (1,) * level + (0,) * (width - level)
    return ThermometerCode(bits=bits, level=level)


@lru_cache(maxsize=None)
def rate_bits(count: int, width: int) -> tuple[int, ...]:
    """Even-spacing placement: bit i is set iff floor((i+1)c/N) > floor(ic/N).

    Every thermometer prefix of length a then sees exactly floor(a*c/N)
    ones, because the prefix sums telescope.
    """
    _check_level(count, width, "count")
    return tuple(
        int((i + 1) * count // width > i * count // width) for i in range(width)
    )


def encode_rate(count: int, width: int) -> RatePattern:
    return RatePattern(bits=rate_bits(count, width), count=count)


def unary_value_int(stream: UnaryStream | Sequence[int]) -> int:
    bits = stream.bits if isinstance(stream, UnaryStream) else _as_bits(stream)
    return sum(bits)


def unary_value_real(stream: UnaryStream | Sequence[int]) -> Fraction:
    """Fraction of ones in the stream, as an exact rational."""
    bits = stream.bits if isinstance(stream, UnaryStream) else _as_bits(stream)
    if len(bits) == 0:
        raise UnaryRangeError("real-valued interpretation needs width >= 1")
    return Fraction(sum(bits), len(bits))


def unary_mul(x: UnaryStream, w: UnaryStream) -> UnaryStream:
    """Bitwise AND of two equal-width streams.

    With a thermometer operand and an even-spaced rate operand the popcount
    is floor(a*b/N), so the real-valued error stays below 1/N.
    """
    if x.width != w.width:
        raise UnaryWidthError(f"width mismatch: {x.width} vs {w.width}")
    return UnaryStream(tuple(a & b for a, b in zip(x.bits, w.bits)))


def unary_accumulate(streams: Iterable[UnaryStream]) -> int:
    return sum(s.popcount() for s in streams)


@lru_cache(maxsize=None)
def prefix_table(width: int) -> np.ndarray:
    """``table[b, a]`` = ones among the first ``a`` bits of ``rate(b)``.

    This is the routing view of ``therm(a) AND rate(b)``: a thermometer bit
    only reaches the sum where the weight pattern has a one.
    """
    table = np.zeros((width + 1, width + 1), dtype=np.int64)
    for b in range(width + 1):
        table[b, 1:] = np.cumsum(rate_bits(b, width))
    table.setflags(write=False)
    return table

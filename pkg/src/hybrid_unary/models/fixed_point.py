"""Exact fixed-point baseline MLP.

Inputs are k-bit levels ``a`` in ``[0, 2^k - 1]`` standing for ``a / (2^k - 1)``.
Weights are w-bit two's-complement codes ``q`` standing for ``q / 2^(w-1)``.
Layer-1 biases live at the layer-1 accumulator scale ``1 / (N * S)`` and
layer-2 biases at ``1 / (N * S * S)`` (``N = 2^k - 1``, ``S = 2^(w-1)``), so
every MAC and bias add is an integer operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .topology import Topology


@dataclass(frozen=True)
class FixedPointConfig:
    input_bits: int = 3
    weight_bits: int = 5

    def __post_init__(self):
        if self.input_bits < 1 or self.weight_bits < 2:
            raise ValueError(f"invalid fixed-point config {self}")

    @property
    def levels(self) -> int:
        """Largest input level, ``2^k - 1`` (also the unary stream width)."""
        return (1 << self.input_bits) - 1

    @property
    def weight_scale(self) -> int:
        return 1 << (self.weight_bits - 1)

    @property
    def qmin(self) -> int:
        return -self.weight_scale

    @property
    def qmax(self) -> int:
        return self.weight_scale - 1


def round_half_away(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def div_round(num: int, den: int) -> int:
    """Integer ``num / den`` rounded to nearest, ties away from zero."""
    if den <= 0:
        raise ValueError("denominator must be positive")
    q = Fraction(num, den)
    mag = (abs(q.numerator) * 2 + q.denominator) // (2 * q.denominator)
    return mag if q >= 0 else -mag


def input_levels(x, config: FixedPointConfig) -> np.ndarray:
    """Quantize normalized features to ADC levels ``round(x * (2^k - 1))``."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.floor(x * config.levels + 0.5).astype(np.int64)


def _int_array(a, shape) -> np.ndarray:
    out = np.array(a, dtype=np.int64).reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class QuantizedMlp:
    topology: Topology
    config: FixedPointConfig
    w1: np.ndarray  # (inputs, hidden) weight codes
    b1: np.ndarray  # (hidden,) at 1/(N*S)
    w2: np.ndarray  # (hidden, classes) weight codes
    b2: np.ndarray  # (classes,) at 1/(N*S*S)

    def __post_init__(self):
        t = self.topology
        object.__setattr__(self, "w1", _int_array(self.w1, (t.inputs, t.hidden)))
        object.__setattr__(self, "b1", _int_array(self.b1, (t.hidden,)))
        object.__setattr__(self, "w2", _int_array(self.w2, (t.hidden, t.classes)))
        object.__setattr__(self, "b2", _int_array(self.b2, (t.classes,)))
        c = self.config
        for w in (self.w1, self.w2):
            if w.size and (w.min() < c.qmin or w.max() > c.qmax):
                raise ValueError("weight code outside the w-bit two's-complement range")

    kind = "baseline"

    @property
    def hidden_scale(self) -> int:
        """Hidden activations are integers in units of ``1 / hidden_scale``."""
        return self.config.levels * self.config.weight_scale

    def replace(self, **changes) -> "QuantizedMlp":
        fields = dict(topology=self.topology, config=self.config, w1=self.w1,
                      b1=self.b1, w2=self.w2, b2=self.b2)
        fields.update(changes)
        return QuantizedMlp(**fields)

    def hidden_levels(self, levels: np.ndarray) -> np.ndarray:
        acc = np.asarray(levels, dtype=np.int64) @ self.w1 + self.b1
        return np.maximum(acc, 0)

    def forward_levels(self, levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return output_layer(self, self.hidden_levels(np.atleast_2d(levels)))

    def predict(self, x) -> np.ndarray:
        return self.forward_levels(input_levels(np.atleast_2d(x), self.config))[0]


def output_layer(model, hidden: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Integer layer-2 MACs plus bias, then argmax (lowest index wins ties)."""
    out = hidden @ model.w2 + model.b2
    return np.argmax(out, axis=1), out


def quantize(model, config: FixedPointConfig = FixedPointConfig()) -> QuantizedMlp:
    """Clip then round float weights onto the w-bit grid; biases at accumulator scale."""
    s, n = config.weight_scale, config.levels
    lo, hi = config.qmin / s, config.qmax / s

    def codes(w):
        return round_half_away(np.clip(np.asarray(w) * s, lo * s, hi * s))

    return QuantizedMlp(
        topology=model.topology,
        config=config,
        w1=codes(model.w1),
        b1=round_half_away(np.asarray(model.b1) * n * s),
        w2=codes(model.w2),
        b2=round_half_away(np.asarray(model.b2) * n * s * s),
    )


def forward_baseline(model: QuantizedMlp, sample, config: FixedPointConfig | None = None):
    """Classify one normalized sample; returns ``(class, output vector)``."""
    config = config or model.config
    levels = input_levels(np.asarray(sample, dtype=np.float64)[None, :], config)
    cls, out = model.forward_levels(levels)
    return int(cls[0]), out[0]


def accumulator_bits(model: QuantizedMlp) -> int:
    """Two's-complement width that holds every layer-1 accumulation."""
    c = model.config
    worst = model.topology.inputs * c.levels * c.weight_scale + int(np.abs(model.b1).max(initial=0))
    return int(np.ceil(np.log2(worst + 1))) + 1

"""Hybrid unary-binary MLP: unary first layer, fixed-point second layer.

Layer 1 holds, per (input, neuron), a sign and a rate-pattern count ``b`` on
an ``N = 2^k - 1`` wide stream. With ADC level ``a`` the product is the
popcount of ``therm(a) AND rate(b)`` = floor(a*b/N). The AND result is itself
an N-bit unary stream, so one popcount unit is ``1/N`` of full scale.
Positive and negative products are summed separately and merged with the
bias. Layer 2 reuses the baseline weight codes; its biases are rescaled to
the ``1/(N * S)`` unit implied by the new hidden scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..unary import prefix_table
from .fixed_point import FixedPointConfig, QuantizedMlp, _int_array, div_round, input_levels, output_layer
from .topology import Topology


@dataclass(frozen=True, eq=False)
class HybridModel:
    topology: Topology
    config: FixedPointConfig
    sign1: np.ndarray   # (inputs, hidden) in {-1, 0, +1}
    count1: np.ndarray  # (inputs, hidden) rate-pattern counts in [0, N]
    b1: np.ndarray      # (hidden,) at 1/N
    w2: np.ndarray      # (hidden, classes) weight codes
    b2: np.ndarray      # (classes,) at 1/(N * S)

    kind = "hybrid"

    def __post_init__(self):
        t, n = self.topology, self.config.levels
        for name, shape in (("sign1", (t.inputs, t.hidden)), ("count1", (t.inputs, t.hidden)),
                            ("b1", (t.hidden,)), ("w2", (t.hidden, t.classes)),
                            ("b2", (t.classes,))):
            object.__setattr__(self, name, _int_array(getattr(self, name), shape))
        if not np.isin(self.sign1, (-1, 0, 1)).all():
            raise ValueError("layer-1 signs must be -1, 0 or +1")
        if self.count1.size and (self.count1.min() < 0 or self.count1.max() > n):
            raise ValueError(f"rate counts must lie in [0, {n}]")
        if ((self.count1 == 0) != (self.sign1 == 0)).any():
            raise ValueError("a rate count is zero exactly when its sign is zero")
        c = self.config
        if self.w2.size and (self.w2.min() < c.qmin or self.w2.max() > c.qmax):
            raise ValueError("weight code outside the w-bit two's-complement range")

    @property
    def width(self) -> int:
        return self.config.levels

    @property
    def hidden_scale(self) -> int:
        return self.config.levels

    def replace(self, **changes) -> "HybridModel":
        fields = dict(topology=self.topology, config=self.config, sign1=self.sign1,
                      count1=self.count1, b1=self.b1, w2=self.w2, b2=self.b2)
        fields.update(changes)
        return HybridModel(**fields)

    def partial_sums(self, levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Positive and negative popcount sums ``(P, M)``, each (n, hidden)."""
        levels = np.atleast_2d(np.asarray(levels, dtype=np.int64))
        routed = prefix_table(self.width)[self.count1[None, :, :], levels[:, :, None]]
        pos = (routed * (self.sign1 > 0)).sum(axis=1)
        neg = (routed * (self.sign1 < 0)).sum(axis=1)
        return pos, neg

    def preactivations(self, levels: np.ndarray) -> np.ndarray:
        pos, neg = self.partial_sums(levels)
        return pos - neg + self.b1

    def hidden_levels(self, levels: np.ndarray) -> np.ndarray:
        return np.maximum(self.preactivations(levels), 0)

    def forward_levels(self, levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return output_layer(self, self.hidden_levels(levels))

    def predict(self, x) -> np.ndarray:
        return self.forward_levels(input_levels(np.atleast_2d(x), self.config))[0]


def to_hybrid(model: QuantizedMlp, config: FixedPointConfig | None = None) -> HybridModel:
    """Move layer 1 onto the unary grid; keep layer-2 codes."""
    config = config or model.config
    n, s = config.levels, model.config.weight_scale
    mag = np.abs(model.w1)
    # round(|q| / S * N), ties away from zero, exact in integers
    count = np.minimum((2 * mag * n + s) // (2 * s), n)
    sign = np.where(count > 0, np.sign(model.w1), 0)
    old_hidden = model.hidden_scale
    b1 = [div_round(int(v) * n, old_hidden) for v in model.b1]
    b2 = [div_round(int(v) * n, old_hidden) for v in model.b2]
    return HybridModel(model.topology, config, sign, count, b1, model.w2, b2)


def forward_hybrid(model: HybridModel, sample, config: FixedPointConfig | None = None):
    """Classify one normalized sample; returns ``(class, output vector)``."""
    config = config or model.config
    levels = input_levels(np.asarray(sample, dtype=np.float64)[None, :], config)
    cls, out = model.forward_levels(levels)
    return int(cls[0]), out[0]


"""Lower baseline and hybrid MLPs to gate-level netlists.

Input encoding contract, recorded in ``netlist.meta["inputs"]``:

* hybrid: port ``x{i}`` carries the surviving thermometer bits of input
  ``i``; bit ``j`` is 1 iff the ADC level exceeds ``positions[j]``.
* baseline: port ``x{i}`` is the k-bit binary level, as produced by a flash
  ADC followed by its thermometer-to-binary encoder.

Outputs are ``y{c}`` (signed layer-2 sums, the functional model's output
vector) and ``class_index`` (argmax index, lowest index on ties).

Gate tags name the structure: ``l1.mul.*`` for baseline layer-1 products,
``l1.pop.*`` / ``l1.merge.*`` / ``l1.relu.*`` for the unary layer,
``l2.mul.h{h}.c{c}`` for one layer-2 product, ``l2.acc.*`` / ``l2.merge.*``
for accumulation, and ``argmax`` for the comparator tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..models.fixed_point import QuantizedMlp
from ..models.hybrid import HybridModel
from ..unary import rate_bits
from .arith import (Word, add_words, const_word, less_than, mux_word, relu, scale_const,
                    unsigned_word, width_for)
from .core import Builder, Netlist, NetlistError

ADC_CELL = "ADC_CMP"
ENCODER_CELL = "ENC"


class LoweringError(RuntimeError):
    pass


@dataclass(frozen=True)
class UtilizationReport:
    used_bits: tuple[int, ...]
    width: int

    @property
    def utilization(self) -> float:
        total = len(self.used_bits) * self.width
        return sum(self.used_bits) / total if total else 0.0

    def to_dict(self) -> dict:
        return {"used_bits": list(self.used_bits), "width": self.width,
                "utilization": self.utilization}


def compute_unused_bits(model: HybridModel) -> tuple[list[int], UtilizationReport]:
    """Per-input OR of the rate patterns as an integer mask (bit p = position p)."""
    n = model.width
    masks = []
    for i in range(model.topology.inputs):
        m = 0
        for h in range(model.topology.hidden):
            for p, bit in enumerate(rate_bits(int(model.count1[i, h]), n)):
                m |= bit << p
        masks.append(m)
    return masks, UtilizationReport(tuple(bin(m).count("1") for m in masks), n)


@dataclass(frozen=True)
class AdcSpec:
    """One flash ADC: ``2^k - 1`` comparators, some of them pruned.

    Threshold ``p`` sits midway between levels ``p`` and ``p + 1`` so the
    comparator bank reproduces ``round(x * N)``.
    """

    name: str
    bits: int
    pruned: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("ADC resolution must be at least 1 bit")
        object.__setattr__(self, "pruned", frozenset(int(p) for p in self.pruned))
        if any(not 0 <= p < self.levels for p in self.pruned):
            raise ValueError("pruned comparator index out of range")

    @property
    def levels(self) -> int:
        return (1 << self.bits) - 1

    @property
    def thresholds(self) -> list[Fraction]:
        return [Fraction(2 * p + 1, 2 * self.levels) for p in range(self.levels)]

    @property
    def positions(self) -> list[int]:
        return [p for p in range(self.levels) if p not in self.pruned]

    @classmethod
    def from_mask(cls, name: str, bits: int, mask: int) -> "AdcSpec":
        n = (1 << bits) - 1
        return cls(name, bits, frozenset(p for p in range(n) if not (mask >> p) & 1))


def _adc_inputs(b: Builder, spec: AdcSpec) -> dict[int, int]:
    nets = b.input(spec.name, len(spec.positions))
    b.interface[ADC_CELL] += len(nets)
    return dict(zip(spec.positions, nets))


def lower_adc(spec: AdcSpec) -> Netlist:
    """Digital boundary of one pruned ADC: one input bit per surviving comparator."""
    b = Builder(f"adc_{spec.name}")
    therm = _adc_inputs(b, spec)
    b.output(spec.name, list(therm.values()))
    b.meta["positions"] = spec.positions
    return b.finish()


def _encode(b: Builder, therm: list[int]) -> list[int]:
    """Thermometer to binary: one-hot edge detect, then OR per output bit."""
    n = len(therm)
    k = n.bit_length()
    onehot = {}
    for p in range(1, n + 1):
        above = therm[p] if p < n else None
        onehot[p] = therm[p - 1] if above is None else b.and2(therm[p - 1], b.inv(above))
    out = []
    for j in range(k):
        acc = b.const(0)
        for p in range(1, n + 1):
            if (p >> j) & 1:
                acc = b.or2(acc, onehot[p])
        out.append(acc)
    return out


def lower_encoder(bits: int) -> Netlist:
    """The ``2^k - 1`` to ``k`` thermometer-to-binary encoder a hybrid ADC drops."""
    b = Builder(f"encoder{bits}")
    therm = b.input("therm", (1 << bits) - 1)
    with b.scope("encoder"):
        b.output("level", _encode(b, therm))
    return b.finish()


# ---------------------------------------------------------------- layer 1

def _hybrid_layer1(b: Builder, model: HybridModel, therm: list[dict[int, int]]):
    n = model.width
    pres, hidden = [], []
    for h in range(model.topology.hidden):
        wires = {1: [], -1: []}
        for i in range(model.topology.inputs):
            s = int(model.sign1[i, h])
            if s == 0:
                continue
            pattern = rate_bits(int(model.count1[i, h]), n)
            # routing only: thermometer bit p joins the sum where the pattern is set
            wires[s].extend(therm[i][p] for p in range(n) if pattern[p])
        with b.scope(f"l1.pop.h{h}"):
            pos = add_words(b, [(Word((w,), 0, 1), 1) for w in wires[1]]) if wires[1] else None
            neg = add_words(b, [(Word((w,), 0, 1), 1) for w in wires[-1]]) if wires[-1] else None
        terms = [(pos, 1)] if pos is not None else []
        if neg is not None:
            terms.append((neg, -1))
        with b.scope(f"l1.merge.h{h}"):
            pre = add_words(b, terms, int(model.b1[h]))
        with b.scope(f"l1.relu.h{h}"):
            hidden.append(relu(b, pre))
        pres.append(pre)
    return pres, hidden


def _baseline_layer1(b: Builder, model: QuantizedMlp, levels: list[Word]):
    pres, hidden = [], []
    for h in range(model.topology.hidden):
        terms = []
        for i in range(model.topology.inputs):
            q = int(model.w1[i, h])
            if q == 0:
                continue
            with b.scope(f"l1.mul.i{i}.h{h}"):
                prod = add_words(b, scale_const(b, levels[i], abs(q)))
            terms.append((prod, 1 if q > 0 else -1))
        with b.scope(f"l1.acc.h{h}"):
            pre = add_words(b, terms, int(model.b1[h]))
        with b.scope(f"l1.relu.h{h}"):
            hidden.append(relu(b, pre))
        pres.append(pre)
    return pres, hidden


def lower_layer1(model: HybridModel | QuantizedMlp, masks=None) -> Netlist:
    """Layer-1 fragment: inputs as in :func:`lower_full`, outputs ``pre{h}`` and ``hid{h}``."""
    b = Builder("layer1")
    pres, hidden = _layer1(b, model, masks)
    for h, (pre, w) in enumerate(zip(pres, hidden)):
        b.output(f"pre{h}", pre.bits, pre.signed)
        b.output(f"hid{h}", w.bits)
    return b.finish()


def _layer1(b: Builder, model, masks=None):
    """Pre-activation and ReLU words per hidden neuron."""
    k, n = model.config.input_bits, model.config.levels
    if isinstance(model, HybridModel):
        if masks is None:
            masks, _ = compute_unused_bits(model)
        else:
            needed, _ = compute_unused_bits(model)
            if any(need & ~m for need, m in zip(needed, masks)):
                raise LoweringError("mask prunes a thermometer bit that a weight uses")
        specs = [AdcSpec.from_mask(f"x{i}", k, m) for i, m in enumerate(masks)]
        therm = [_adc_inputs(b, s) for s in specs]
        b.meta["inputs"] = [{"encoding": "thermometer", "positions": s.positions}
                            for s in specs]
        return _hybrid_layer1(b, model, therm)
    levels = []
    for i in range(model.topology.inputs):
        levels.append(unsigned_word(b.input(f"x{i}", k), n))
    b.interface[ADC_CELL] += model.topology.inputs * n
    b.interface[ENCODER_CELL] += model.topology.inputs
    b.meta["inputs"] = [{"encoding": "binary", "bits": k}] * model.topology.inputs
    return _baseline_layer1(b, model, levels)


# ---------------------------------------------------------------- layer 2

def hidden_bounds(model) -> list[int]:
    """Largest value each hidden activation can reach."""
    if isinstance(model, HybridModel):
        top = (model.count1 * (model.sign1 > 0)).sum(axis=0) + model.b1
    else:
        top = (np.maximum(model.w1, 0) * model.config.levels).sum(axis=0) + model.b1
    return [max(int(v), 0) for v in top]


def _layer2(b: Builder, model, hidden: list[Word]) -> list[Word]:
    t = model.topology
    adders = []
    outputs = []
    for c in range(t.classes):
        pos, neg = [], []
        for h in range(t.hidden):
            q = int(model.w2[h, c])
            adders.append([h, c, max(bin(abs(q)).count("1") - 1, 0)])
            if q == 0 or hidden[h].hi == 0:
                continue
            with b.scope(f"l2.mul.h{h}.c{c}"):
                prod = add_words(b, scale_const(b, hidden[h], abs(q)))
            (pos if q > 0 else neg).append((prod, 1))
        with b.scope(f"l2.acc.c{c}"):
            sums = [(add_words(b, grp), sign) for grp, sign in ((pos, 1), (neg, -1)) if grp]
        with b.scope(f"l2.merge.c{c}"):
            y = add_words(b, sums, int(model.b2[c]))
        outputs.append(y)
    b.meta["l2_pp_adders"] = adders
    return outputs


def lower_layer2(model, hidden_max=None) -> Netlist:
    """Layer-2 fragment: unsigned ``hid{h}`` inputs, signed ``y{c}`` outputs."""
    b = Builder("layer2")
    bounds = hidden_bounds(model) if hidden_max is None else [int(v) for v in hidden_max]
    hidden = [unsigned_word(b.input(f"hid{h}", width_for(0, m)), m)
              for h, m in enumerate(bounds)]
    for c, y in enumerate(_layer2(b, model, hidden)):
        b.output(f"y{c}", y.bits, y.signed)
    return b.finish()


# ---------------------------------------------------------------- argmax

def _argmax(b: Builder, values: list[Word]) -> list[int]:
    c = len(values)
    width = max(1, (c - 1).bit_length())
    with b.scope("argmax"):
        nodes = [(v, const_word(b, i)) for i, v in enumerate(values)]
        while len(nodes) > 1:
            nxt = []
            for j in range(0, len(nodes) - 1, 2):
                (va, ia), (vb, ib) = nodes[j], nodes[j + 1]
                # the right side holds higher indices: it wins only when strictly larger
                sel = less_than(b, va, vb)
                nxt.append((mux_word(b, sel, va, vb), mux_word(b, sel, ia, ib)))
            if len(nodes) % 2:
                nxt.append(nodes[-1])
            nodes = nxt
        idx = nodes[0][1]
        bits = list(idx.bits[:width])
        bits += [b.const(0)] * (width - len(bits))
    return bits


def lower_argmax(num_classes: int, value_width: int) -> Netlist:
    """Comparator tree over ``num_classes`` signed inputs ``y{c}``; output ``class_index``."""
    if num_classes < 1:
        raise ValueError("need at least one class")
    b = Builder(f"argmax{num_classes}")
    lo, hi = -(1 << (value_width - 1)), (1 << (value_width - 1)) - 1
    values = [Word(tuple(b.input(f"y{c}", value_width, True)), lo, hi)
              for c in range(num_classes)]
    b.output("class_index", _argmax(b, values))
    return b.finish()


# ---------------------------------------------------------------- full

def lower_full(model: HybridModel | QuantizedMlp, mode: str | None = None, masks=None,
               name: str | None = None) -> Netlist:
    """Compose ADC boundary, both layers, ReLU and the argmax tree."""
    expected = "hybrid" if isinstance(model, HybridModel) else "baseline"
    mode = mode or expected
    if mode != expected:
        raise LoweringError(f"mode {mode!r} does not match a {expected} model")
    b = Builder(name or f"mlp_{mode}")
    b.meta["mode"] = mode
    b.meta["input_bits"] = model.config.input_bits
    _, hidden = _layer1(b, model, masks)
    ys = _layer2(b, model, hidden)
    for c, y in enumerate(ys):
        b.output(f"y{c}", y.bits, y.signed)
    b.output("class_index", _argmax(b, ys))
    b.meta["hidden_bounds"] = [w.hi for w in hidden]
    try:
        return b.finish()
    except NetlistError as exc:
        raise LoweringError(f"internal lowering bug: {exc}") from exc

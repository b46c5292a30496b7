"""Independent oracles and hypothesis strategies shared by the test modules."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from hybrid_unary.models import FixedPointConfig, QuantizedMlp, Topology
from hybrid_unary.netlist import Builder
from hybrid_unary.unary import encode_rate, encode_thermometer, unary_mul


def bitlevel_preactivations(model, levels) -> list[int]:
    """Hybrid layer 1 by materializing every stream and ANDing it."""
    n = model.width
    out = []
    for h in range(model.topology.hidden):
        pos = neg = 0
        for i, a in enumerate(levels):
            s = int(model.sign1[i, h])
            if s == 0:
                continue
            prod = unary_mul(encode_thermometer(int(a), n), encode_rate(int(model.count1[i, h]), n))
            if s > 0:
                pos += prod.popcount()
            else:
                neg += prod.popcount()
        out.append(pos - neg + int(model.b1[h]))
    return out


def bitlevel_hybrid(model, levels) -> tuple[int, list[int]]:
    hidden = [max(v, 0) for v in bitlevel_preactivations(model, levels)]
    outs = [sum(hidden[h] * int(model.w2[h, c]) for h in range(model.topology.hidden))
            + int(model.b2[c]) for c in range(model.topology.classes)]
    return outs.index(max(outs)), outs


def rational_baseline(model: QuantizedMlp, levels) -> tuple[int, list[Fraction]]:
    """Baseline forward pass in exact rationals at real-valued scale."""
    c = model.config
    n, s = c.levels, c.weight_scale
    x = [Fraction(int(a), n) for a in levels]
    hidden = []
    for h in range(model.topology.hidden):
        acc = sum((x[i] * Fraction(int(model.w1[i, h]), s) for i in range(len(x))), Fraction(0))
        hidden.append(max(acc + Fraction(int(model.b1[h]), n * s), Fraction(0)))
    outs = [sum((hidden[h] * Fraction(int(model.w2[h, k]), s)
                 for h in range(model.topology.hidden)), Fraction(0))
            + Fraction(int(model.b2[k]), n * s * s) for k in range(model.topology.classes)]
    return outs.index(max(outs)), outs


GATE_FUNCS = {
    "INV": lambda a: (1 - a,),
    "AND2": lambda a, b: (a & b,),
    "OR2": lambda a, b: (a | b,),
    "XOR2": lambda a, b: (a ^ b,),
    "NAND2": lambda a, b: (1 - (a & b),),
    "NOR2": lambda a, b: (1 - (a | b),),
    "HA": lambda a, b: ((a + b) & 1, (a + b) >> 1),
    "FA": lambda a, b, c: ((a + b + c) & 1, (a + b + c) >> 1),
    "MUX2": lambda s, a, b: (b if s else a,),
    "CONST0": lambda: (0,),
    "CONST1": lambda: (1,),
}


def interpret(netlist, values: dict) -> dict:
    """Scalar reference evaluator: repeated sweeps until every net settles."""
    val = {}
    for p in netlist.inputs:
        for j, n in enumerate(p.nets):
            val[n] = (int(values[p.name]) >> j) & 1
    pending = list(netlist.gates)
    while pending:
        rest = []
        for g in pending:
            if all(n in val for n in g.inputs):
                for n, v in zip(g.outputs, GATE_FUNCS[g.kind](*(val[n] for n in g.inputs))):
                    val[n] = v
            else:
                rest.append(g)
        assert len(rest) < len(pending), "netlist does not settle"
        pending = rest
    out = {}
    for p in netlist.outputs:
        v = sum(val[n] << j for j, n in enumerate(p.nets))
        if p.signed and p.nets and val[p.nets[-1]]:
            v -= 1 << len(p.nets)
        out[p.name] = v
    return out


def single(kind, n_in):
    """Netlist holding one gate of ``kind`` with ports ``i{j}`` and ``o{j}``."""
    b = Builder(kind.lower())
    ins = [b.input(f"i{j}", 1)[0] for j in range(n_in)]
    outs = b._emit(kind, *ins)
    for j, o in enumerate(outs):
        b.output(f"o{j}", [o])
    return b.finish()


@st.composite
def topologies(draw, max_inputs=4, max_hidden=4, max_classes=4):
    return Topology(draw(st.integers(1, max_inputs)), draw(st.integers(1, max_hidden)),
                    draw(st.integers(1, max_classes)))


@st.composite
def quantized_models(draw, max_inputs=4, max_hidden=4, max_classes=4):
    t = draw(topologies(max_inputs, max_hidden, max_classes))
    c = FixedPointConfig()
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    # mix in exact zeros and powers of two so folding paths get exercised
    pick = draw(st.sampled_from(["uniform", "sparse", "pow2"]))

    def codes(shape):
        w = rng.integers(c.qmin, c.qmax + 1, shape)
        if pick == "sparse":
            w[rng.random(shape) < 0.5] = 0
        elif pick == "pow2":
            w = rng.choice([-16, -8, -4, -2, -1, 0, 1, 2, 4, 8], shape)
        return w

    b1 = rng.integers(-3 * c.levels * c.weight_scale, 3 * c.levels * c.weight_scale, t.hidden)
    b2 = rng.integers(-4000, 4000, t.classes)
    return QuantizedMlp(t, c, codes((t.inputs, t.hidden)), b1, codes((t.hidden, t.classes)), b2)


def level_vectors(inputs: int, levels: int = 7):
    return st.lists(st.integers(0, levels), min_size=inputs, max_size=inputs)

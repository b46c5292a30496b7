import numpy as np
import pytest
from helpers import interpret, quantized_models
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_unary.models import FixedPointConfig, HybridModel, QuantizedMlp, Topology, to_hybrid
from hybrid_unary.netlist import (ADC_CELL, ENCODER_CELL, AdcSpec, Builder, Gate, LoweringError,
                                  Netlist, NetlistError, Port, compute_unused_bits, dumps,
                                  load_netlist, loads, lower_adc, lower_argmax, lower_encoder,
                                  lower_full, lower_layer1, lower_layer2, save_netlist,
                                  to_verilog)
from hybrid_unary.netlist.arith import Word, add_words, popcount, width_for
from hybrid_unary.simulator import eval_netlist, run_levels, simulate
from hybrid_unary.unary import rate_bits

FX = FixedPointConfig()


def hybrid(signs, counts, b1, w2, b2):
    signs = np.atleast_2d(signs)
    t = Topology(signs.shape[0], signs.shape[1], np.atleast_2d(w2).shape[1])
    return HybridModel(t, FX, signs, counts, b1, w2, b2)


def all_levels(inputs):
    grid = np.meshgrid(*[np.arange(8)] * inputs, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


# ---------------------------------------------------------------- builder and IR

def test_builder_folds_constants():
    b = Builder("t")
    (x,) = b.input("x", 1)
    zero, one = b.const(0), b.const(1)
    assert b.and2(x, zero) == zero and b.and2(x, one) == x
    assert b.or2(x, one) == one and b.or2(zero, x) == x
    assert b.xor2(x, x) == zero and b.value(b.inv(one)) == 0
    assert b.mux2(one, zero, x) == x
    assert b.ha(x, zero) == (x, zero)
    b.output("y", [b.and2(x, one)])
    nl = b.finish()
    assert nl.gates == ()


def test_finish_removes_dead_logic_and_slims_cells():
    b = Builder("t")
    x = b.input("x", 3)
    b.and2(x[0], x[1])  # drives nothing
    s, _ = b.fa(*x)     # carry unused
    _, c = b.ha(x[0], x[1])  # sum unused
    b.output("s", [s])
    b.output("c", [c])
    nl = b.finish()
    assert sorted(nl.histogram().items()) == [("AND2", 1), ("XOR2", 2)]
    for v in range(8):
        bits = [(v >> j) & 1 for j in range(3)]
        assert eval_netlist(nl, {"x": v}) == {"s": sum(bits) & 1, "c": bits[0] & bits[1]}


def make(gates, inputs=(Port("a", (0,)),), outputs=(Port("y", (1,)),), nets=2):
    return Netlist("t", tuple(inputs), tuple(outputs), tuple(gates), nets)


@pytest.mark.parametrize("gates,outputs,msg", [
    ([Gate("INV", (5,), (1,))], None, "floating"),
    ([Gate("INV", (0,), (1,)), Gate("INV", (0,), (1,))], None, "multiple drivers"),
    ([Gate("INV", (2,), (1,)), Gate("INV", (1,), (2,))], None, "cycle"),
    ([Gate("INV", (0,), (1,))], (Port("y", (7,)),), "undriven"),
    ([Gate("AND2", (0,), (1,))], None, "needs 2 inputs"),
    ([Gate("NAND3", (0,), (1,))], None, "unknown gate kind"),
])
def test_validate_rejects_broken_netlists(gates, outputs, msg):
    nl = make(gates, outputs=outputs or (Port("y", (1,)),), nets=3)
    with pytest.raises(NetlistError, match=msg):
        nl.validate()


# ---------------------------------------------------------------- word arithmetic

@st.composite
def word_sums(draw):
    specs = draw(st.lists(st.tuples(st.integers(-40, 40), st.integers(0, 60),
                                    st.sampled_from([1, -1])), min_size=1, max_size=4))
    return [(lo, lo + span, s) for lo, span, s in specs], draw(st.integers(-100, 100))


@settings(max_examples=60)
@given(word_sums(), st.randoms())
def test_add_words_is_exact(case, rnd):
    specs, constant = case
    b = Builder("sum")
    terms = []
    for j, (lo, hi, s) in enumerate(specs):
        bits = b.input(f"w{j}", width_for(lo, hi), signed=lo < 0)
        terms.append((Word(tuple(bits), lo, hi), s))
    out = add_words(b, terms, constant)
    b.output("y", out.bits, out.signed)
    nl = b.finish()
    for _ in range(20):
        vals = [rnd.randint(lo, hi) for lo, hi, _ in specs]
        got = eval_netlist(nl, {f"w{j}": v for j, v in enumerate(vals)})["y"]
        assert got == constant + sum(v * s for v, (_, _, s) in zip(vals, specs))
        assert out.lo <= got <= out.hi


@pytest.mark.parametrize("n", list(range(1, 11)) + [16, 31, 47, 64])
def test_popcount_tree(n):
    b = Builder("pop")
    out = popcount(b, b.input("x", n))
    b.output("y", out.bits)
    nl = b.finish()
    if n <= 10:
        vals = [int(v) for v in range(1 << n)]
    else:
        rng = np.random.default_rng(n)
        vals = [int(rng.integers(0, 1 << 62)) * 4 + int(rng.integers(0, 4)) for _ in range(2000)]
        vals = [v & ((1 << n) - 1) for v in vals] + [(1 << n) - 1]
    # 64-bit patterns travel as wrapped int64
    packed = np.array([v - (1 << 64) if v >> 63 else v for v in vals], dtype=np.int64)
    got = simulate(nl, {"x": packed})["y"]
    assert got.tolist() == [bin(v).count("1") for v in vals]
    assert nl.count(["AND2", "OR2", "MUX2"]) == 0


def test_popcount_of_seven_cell_count():
    b = Builder("pop7")
    out = popcount(b, b.input("x", 7))
    b.output("y", out.bits)
    # 7 -> 3 bits: FA(3) + FA(3) + FA(sum, sum, x7), then carries FA, then HA
    assert dict(b.finish().histogram()) == {"FA": 4}


# ---------------------------------------------------------------- ADC and encoder

def test_compute_unused_bits_example():
    m = hybrid([[1, -1, 0]], [[3, 2, 0]], [0, 0, 0], np.ones((3, 1)), [0])
    masks, report = compute_unused_bits(m)
    assert rate_bits(3, 7) == (0, 0, 1, 0, 1, 0, 1)
    assert rate_bits(2, 7) == (0, 0, 0, 1, 0, 0, 1)
    assert masks == [0b1011100]
    assert report.used_bits == (4,)
    assert report.utilization == pytest.approx(4 / 7)


def test_compute_unused_bits_extremes():
    m = hybrid([[0, 0], [1, -1]], [[0, 0], [7, 1]], [0, 0], np.ones((2, 1)), [0])
    masks, report = compute_unused_bits(m)
    assert masks[0] == 0 and masks[1] == 0b1111111
    assert report.used_bits == (0, 7)
    assert 0 <= report.utilization <= 1


@pytest.mark.parametrize("bits,pruned,width", [(3, (), 7), (3, (0, 5), 5), (1, (), 1),
                                               (2, (0, 1, 2), 0)])
def test_lower_adc(bits, pruned, width):
    spec = AdcSpec("x0", bits, frozenset(pruned))
    nl = lower_adc(spec)
    assert nl.input_port("x0").width == width
    assert nl.interface[ADC_CELL] == width
    assert len(spec.thresholds) == (1 << bits) - 1
    assert nl.meta["positions"] == [p for p in range((1 << bits) - 1) if p not in pruned]


def test_adc_spec_from_mask_and_errors():
    spec = AdcSpec.from_mask("x", 3, 0b1011100)
    assert spec.positions == [2, 3, 4, 6] and spec.pruned == {0, 1, 5}
    with pytest.raises(ValueError):
        AdcSpec("x", 0)
    with pytest.raises(ValueError):
        AdcSpec("x", 3, frozenset({7}))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_encoder_maps_every_level(k):
    nl = lower_encoder(k)
    n = (1 << k) - 1
    therm = [(1 << a) - 1 for a in range(n + 1)]
    assert simulate(nl, {"therm": therm})["level"].tolist() == list(range(n + 1))
    assert nl.count(["AND2", "OR2", "INV"]) == nl.count()


# ---------------------------------------------------------------- layer fragments

def test_layer1_single_weight_fragment():
    m = hybrid([[1]], [[3]], [0], [[1]], [0])
    nl = lower_layer1(m)
    assert nl.input_port("x0").width == 3
    pre = nl.output_port("pre0")
    assert not pre.signed and pre.width == 2
    lv = np.arange(8)[:, None]
    out = run_fragment(nl, lv)
    assert out["pre0"].tolist() == m.preactivations(lv)[:, 0].tolist()
    assert set(out["pre0"].tolist()) == {0, 1, 2, 3}


def run_fragment(nl, levels):
    from hybrid_unary.simulator import encode_levels
    return simulate(nl, encode_levels(nl, levels))


def test_layer1_zero_weights_give_constant_bias():
    m = hybrid([[0, 0]], [[0, 0]], [5, -3], np.ones((2, 1)), [0])
    nl = lower_layer1(m)
    assert nl.input_port("x0").width == 0
    assert nl.count(["FA", "HA", "XOR2", "AND2", "OR2", "INV", "MUX2"]) == 0
    out = simulate(nl, {"x0": [0]})
    assert out["pre0"].tolist() == [5] and out["pre1"].tolist() == [-3]
    assert out["hid0"].tolist() == [5] and out["hid1"].tolist() == [0]


@settings(max_examples=25, deadline=None)
@given(quantized_models(max_inputs=3))
def test_layer1_fragment_exhaustive(model):
    lv = all_levels(model.topology.inputs)
    for m in (model, to_hybrid(model)):
        out = run_fragment(lower_layer1(m), lv)
        for h in range(m.topology.hidden):
            want = lv @ m.w1[:, h] + m.b1[h] if m.kind == "baseline" \
                else m.preactivations(lv)[:, h]
            assert out[f"pre{h}"].tolist() == want.tolist()
            assert out[f"hid{h}"].tolist() == np.maximum(want, 0).tolist()


@pytest.mark.parametrize("q,adders", [(4, 0), (-8, 0), (1, 0), (5, 1), (7, 2), (-15, 3)])
def test_layer2_partial_product_adders(q, adders):
    m = hybrid([[1]], [[7]], [0], [[q]], [0])
    nl = lower_layer2(m)
    assert nl.meta["l2_pp_adders"] == [[0, 0, adders]]
    cells = nl.count(["HA", "FA"], "l2.mul.h0.c0")
    assert (cells == 0) == (adders == 0)
    hid = np.arange(8)
    assert simulate(nl, {"hid0": hid})["y0"].tolist() == (hid * q).tolist()


def test_layer2_zero_weight_has_no_hardware():
    m = hybrid([[1, 1]], [[7, 7]], [0, 0], [[0, 3], [2, 0]], [1, -1])
    nl = lower_layer2(m)
    assert nl.count(tag_prefix="l2.mul.h0.c0") == 0
    assert nl.count(tag_prefix="l2.mul.h1.c1") == 0
    out = simulate(nl, {"hid0": [4], "hid1": [6]})
    assert (out["y0"].tolist(), out["y1"].tolist()) == ([13], [11])


@pytest.mark.parametrize("values,index", [((5, 9, 2), 1), ((3, 3, 3), 0), ((-1, 0), 1),
                                          ((0, -1), 0), ((-8, -8), 0), ((1, 2, 3, 4, 4), 3)])
def test_argmax_examples(values, index):
    nl = lower_argmax(len(values), 5)
    out = eval_netlist(nl, {f"y{c}": v for c, v in enumerate(values)})
    assert out["class_index"] == index
    assert nl.output_port("class_index").width == max(1, (len(values) - 1).bit_length())


@given(st.lists(st.integers(-16, 15), min_size=1, max_size=9))
def test_argmax_property(values):
    nl = lower_argmax(len(values), 5)
    out = eval_netlist(nl, {f"y{c}": v for c, v in enumerate(values)})
    assert out["class_index"] == values.index(max(values))


# ---------------------------------------------------------------- full models

def test_toy_hybrid_exhaustive():
    m = hybrid([[1]], [[3]], [-1], [[5]], [2])
    nl = lower_full(m)
    lv = np.arange(8)[:, None]
    cls, ys = run_levels(nl, lv)
    want_cls, want_ys = m.forward_levels(lv)
    assert np.array_equal(cls, want_cls) and np.array_equal(ys, want_ys)


@settings(max_examples=30, deadline=None)
@given(quantized_models())
def test_lowered_models_match_functional_models(model):
    lv = all_levels(model.topology.inputs) if model.topology.inputs <= 3 else \
        np.random.default_rng(0).integers(0, 8, (3000, model.topology.inputs))
    for m in (model, to_hybrid(model)):
        nl = lower_full(m)
        nl.validate()
        cls, ys = run_levels(nl, lv[:600])
        want_cls, want_ys = m.forward_levels(lv[:600])
        assert np.array_equal(ys, want_ys) and np.array_equal(cls, want_cls)


@settings(max_examples=10, deadline=None)
@given(quantized_models(max_inputs=3, max_hidden=2, max_classes=3))
def test_scalar_interpreter_agrees(model):
    m = to_hybrid(model)
    nl = lower_full(m)
    from hybrid_unary.simulator import encode_levels
    lv = all_levels(m.topology.inputs)[::7]
    ports = encode_levels(nl, lv)
    batch = simulate(nl, ports)
    for v in range(len(lv)):
        one = interpret(nl, {k: int(a[v]) for k, a in ports.items()})
        assert one == {k: int(a[v]) for k, a in batch.items()}


def test_hybrid_layer1_has_no_multiplier_gates(balance):
    nl = lower_full(balance["hybrid"])
    assert nl.count(tag_prefix="l1.mul") == 0
    assert not any("mul" in g.tag for g in nl.gates if g.tag.startswith("l1"))
    base = lower_full(balance["baseline"])
    assert base.count(tag_prefix="l1.mul") > 0
    assert base.interface[ENCODER_CELL] == 4
    assert base.interface[ADC_CELL] == 4 * 7


def test_pow2_weights_contribute_no_partial_product_adders(balance):
    p2 = balance["pow2"]
    nl = lower_full(p2)
    for h, c, adders in nl.meta["l2_pp_adders"]:
        q = abs(int(p2.w2[h, c]))
        if q & (q - 1) == 0:
            assert adders == 0
            assert nl.count(["HA", "FA"], f"l2.mul.h{h}.c{c}") == 0


def test_pruning_is_sound(balance):
    m = balance["hybrid"]
    masks, _ = compute_unused_bits(m)
    pruned = lower_full(m)
    full = lower_full(m, masks=[0b1111111] * m.topology.inputs)
    lv = balance["levels"][:200]
    rng = np.random.default_rng(1)
    ports = {}
    for i, mask in enumerate(masks):
        v = np.zeros(len(lv), dtype=np.int64)
        for p in range(7):
            bit = (lv[:, i] > p) if (mask >> p) & 1 else rng.integers(0, 2, len(lv))
            v |= bit.astype(np.int64) << p
        ports[f"x{i}"] = v
    got = simulate(full, ports)
    want_cls, want_ys = run_levels(pruned, lv)
    assert np.array_equal(got["class_index"], want_cls)
    assert full.interface[ADC_CELL] == 4 * 7 >= pruned.interface[ADC_CELL]
    assert pruned.interface[ADC_CELL] == sum(bin(x).count("1") for x in masks)


def test_lowering_errors():
    m = hybrid([[1]], [[3]], [0], [[1]], [0])
    with pytest.raises(LoweringError):
        lower_full(m, mode="baseline")
    with pytest.raises(LoweringError):
        lower_full(m, masks=[0b0000001])


# ---------------------------------------------------------------- serialization

@settings(max_examples=15, deadline=None)
@given(quantized_models())
def test_text_round_trip(model):
    for m in (model, to_hybrid(model)):
        nl = lower_full(m)
        text = dumps(nl)
        back = loads(text)
        assert dumps(back) == text
        assert back.interface == nl.interface and back.meta == nl.meta


def test_text_file_and_errors(tmp_path, balance):
    nl = lower_full(balance["hybrid"])
    p = tmp_path / "n.txt"
    save_netlist(nl, p)
    assert load_netlist(p).histogram() == nl.histogram()
    with pytest.raises(NetlistError):
        loads("something else 1\n")
    text = p.read_text().splitlines()
    broken = [ln for ln in text if not ln.startswith("gate")] + \
        [ln for ln in text if ln.startswith("gate")][1:]
    with pytest.raises(NetlistError):
        loads("\n".join(broken) + "\n")


def test_lowering_is_deterministic(balance):
    assert dumps(lower_full(balance["pow2"])) == dumps(lower_full(balance["pow2"]))


def test_verilog_export(balance):
    nl = lower_full(balance["hybrid"], name="bal_hybrid")
    v = to_verilog(nl)
    assert v.startswith("module bal_hybrid (x0, x1, x2, x3, y0, y1, y2, class_index);")
    assert v.rstrip().endswith("endmodule")
    assert "  output [1:0] class_index;" in v
    assert f"  wire [{nl.num_nets - 1}:0] n;" in v
    # one primitive or assign per gate output, one assign per port bit
    cells = sum(1 for ln in v.splitlines() if ln.startswith(("  not ", "  and ", "  or ",
                                                              "  xor ", "  assign {")))
    assert cells == sum(1 for g in nl.gates if g.kind not in ("CONST0", "CONST1", "MUX2"))
    q = QuantizedMlp(Topology(1, 1, 2), FX, [[3]], [0], [[1, -1]], [0, 0])
    text = to_verilog(lower_full(q))
    assert "  input [2:0] x0;" in text and "  output signed [5:0] y1;" in text

"""Bit-exact combinational simulation and netlist-versus-model equivalence.

Vectors are evaluated bit-parallel: each net holds a Python integer whose
bit ``v`` is the net's value under vector ``v``, so one pass over the gates
evaluates a whole batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .netlist.core import Netlist, NetlistError

REPORT_FORMAT = "hybrid-unary-equivalence"
REPORT_VERSION = 1
EXHAUSTIVE_LIMIT = 1 << 20


class SimulationError(ValueError):
    pass


class PlanError(ValueError):
    pass


def _pack(values: np.ndarray, width: int) -> list[int]:
    """Per bit j, an integer whose bit v is bit j of ``values[v]``."""
    out = []
    for j in range(width):
        bits = ((values >> j) & 1).astype(np.uint8)
        out.append(int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little"))
    return out


def _unpack(words: list[int], count: int, signed: bool) -> np.ndarray:
    values = np.zeros(count, dtype=np.int64)
    nbytes = (count + 7) // 8
    for j, w in enumerate(words):
        raw = np.frombuffer(w.to_bytes(nbytes, "little"), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:count].astype(np.int64)
        if signed and j == len(words) - 1:
            values -= bits << j
        else:
            values += bits << j
    return values


def simulate(netlist: Netlist, inputs: dict) -> dict[str, np.ndarray]:
    """Evaluate a batch: ``inputs[port]`` holds one integer per vector.

    Port values are read modulo ``2^width`` (two's complement for signed
    ports). Returns one integer array per output port.
    """
    missing = [p.name for p in netlist.inputs if p.name not in inputs]
    if missing:
        raise SimulationError(f"no value for input port(s) {', '.join(missing)}")
    arrays = {p.name: np.atleast_1d(np.asarray(inputs[p.name], dtype=np.int64))
              for p in netlist.inputs}
    sizes = {len(a) for a in arrays.values()}
    if len(sizes) > 1:
        raise SimulationError("input ports disagree on the number of vectors")
    count = sizes.pop() if sizes else 1
    mask = (1 << count) - 1
    val: dict[int, int] = {}
    for p in netlist.inputs:
        for n, w in zip(p.nets, _pack(arrays[p.name], p.width)):
            val[n] = w
    for g in netlist.topological_order():
        i = [val[n] for n in g.inputs]
        k = g.kind
        if k == "INV":
            r = (mask ^ i[0],)
        elif k == "AND2":
            r = (i[0] & i[1],)
        elif k == "OR2":
            r = (i[0] | i[1],)
        elif k == "XOR2":
            r = (i[0] ^ i[1],)
        elif k == "NAND2":
            r = (mask ^ (i[0] & i[1]),)
        elif k == "NOR2":
            r = (mask ^ (i[0] | i[1]),)
        elif k == "HA":
            r = (i[0] ^ i[1], i[0] & i[1])
        elif k == "FA":
            r = (i[0] ^ i[1] ^ i[2], (i[0] & i[1]) | (i[2] & (i[0] ^ i[1])))
        elif k == "MUX2":
            r = ((i[0] & i[2]) | ((mask ^ i[0]) & i[1]),)
        elif k == "CONST0":
            r = (0,)
        elif k == "CONST1":
            r = (mask,)
        else:
            raise NetlistError(f"unknown gate kind {k!r}")
        for n, v in zip(g.outputs, r):
            val[n] = v
    return {p.name: _unpack([val[n] for n in p.nets], count, p.signed) for p in netlist.outputs}


def eval_netlist(netlist: Netlist, inputs: dict) -> dict[str, int]:
    """Single-vector evaluation: port name to integer."""
    out = simulate(netlist, {k: [v] for k, v in inputs.items()})
    return {k: int(v[0]) for k, v in out.items()}


# ---------------------------------------------------------------- level encoding

def encode_levels(netlist: Netlist, levels: np.ndarray) -> dict[str, np.ndarray]:
    """ADC levels (n, inputs) to port values under the netlist's input contract."""
    levels = np.atleast_2d(np.asarray(levels, dtype=np.int64))
    specs = netlist.meta.get("inputs")
    if specs is None or len(specs) != levels.shape[1]:
        raise SimulationError("netlist does not describe an input encoding for these levels")
    ports = {}
    for i, spec in enumerate(specs):
        if spec["encoding"] == "thermometer":
            v = np.zeros(len(levels), dtype=np.int64)
            for j, p in enumerate(spec["positions"]):
                v |= (levels[:, i] > p).astype(np.int64) << j
        else:
            v = levels[:, i]
        ports[f"x{i}"] = v
    return ports


def run_levels(netlist: Netlist, levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Classes and output vectors for a batch of level vectors."""
    out = simulate(netlist, encode_levels(netlist, levels))
    classes = sum(1 for p in netlist.outputs if p.name.startswith("y"))
    ys = np.stack([out[f"y{c}"] for c in range(classes)], axis=1)
    return out["class_index"], ys


# ---------------------------------------------------------------- equivalence

@dataclass(frozen=True)
class Plan:
    mode: str = "randomized"
    seed: int = 0
    count: int = 1000
    samples: np.ndarray | None = field(default=None, compare=False, repr=False)

    @classmethod
    def exhaustive(cls) -> "Plan":
        return cls("exhaustive", 0, 0)

    @classmethod
    def randomized(cls, seed: int, count: int, samples=None) -> "Plan":
        return cls("randomized", seed, count, samples)


@dataclass
class EquivalenceReport:
    mode: str
    seed: int | None
    samples_tested: int
    mismatch_count: int
    mismatches: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.mismatch_count == 0

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "version": REPORT_VERSION, "mode": self.mode,
                "seed": self.seed, "samples_tested": self.samples_tested,
                "mismatch_count": self.mismatch_count, "mismatches": self.mismatches,
                "verdict": "pass" if self.passed else "fail", "meta": self.meta}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "EquivalenceReport":
        d = json.loads(text)
        if d.get("format") != REPORT_FORMAT or d.get("version") != REPORT_VERSION:
            raise ValueError("not a version-1 equivalence report")
        return cls(d["mode"], d["seed"], d["samples_tested"], d["mismatch_count"],
                   d["mismatches"], d.get("meta", {}))


def _vectors(inputs: int, levels: int, plan: Plan) -> np.ndarray:
    if plan.mode == "exhaustive":
        space = (levels + 1) ** inputs
        if space > EXHAUSTIVE_LIMIT:
            raise PlanError(f"{space} input-level vectors exceed the exhaustive limit "
                            f"of {EXHAUSTIVE_LIMIT}")
        return np.array(list(product(range(levels + 1), repeat=inputs)),
                        dtype=np.int64).reshape(-1, inputs)
    if plan.mode != "randomized":
        raise PlanError(f"unknown plan mode {plan.mode!r}")
    if plan.count < 0:
        raise PlanError("sample count must be non-negative")
    rng = np.random.default_rng([plan.seed, 4])
    parts = []
    if plan.samples is not None and len(plan.samples):
        pick = rng.integers(0, len(plan.samples), plan.count)
        parts.append(np.asarray(plan.samples, dtype=np.int64)[pick])
    parts.append(rng.integers(0, levels + 1, (plan.count, inputs)))
    return np.concatenate(parts).reshape(-1, inputs)


def check_equivalence(netlist: Netlist, oracle, plan: Plan = Plan(),
                      max_listed: int = 20) -> EquivalenceReport:
    """Compare netlist outputs with ``oracle.forward_levels`` on level vectors.

    Randomized plans draw ``count`` rows from ``plan.samples`` (dataset
    levels) when given, plus ``count`` uniform level vectors.
    """
    t = oracle.topology
    vecs = _vectors(t.inputs, oracle.config.levels, plan)
    want_cls, want_y = oracle.forward_levels(vecs)
    got_cls, got_y = run_levels(netlist, vecs)
    bad = np.flatnonzero((want_cls != got_cls) | (want_y != got_y).any(axis=1))
    listed = [{"levels": vecs[v].tolist(),
               "expected": {"class": int(want_cls[v]), "outputs": want_y[v].tolist()},
               "got": {"class": int(got_cls[v]), "outputs": got_y[v].tolist()}}
              for v in bad[:max_listed]]
    return EquivalenceReport(plan.mode, plan.seed if plan.mode == "randomized" else None,
                             len(vecs), len(bad), listed)

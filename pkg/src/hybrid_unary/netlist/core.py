"""Gate-level combinational netlist IR and a constant-folding builder.

Nets are integers. Every net has exactly one driver: a primary-input port
bit or one gate output. Multi-bit ports list their nets LSB first.

Gate pin order:

    INV a | AND2/OR2/XOR2/NAND2/NOR2 a b | MUX2 sel a b  (sel ? b : a)
    HA a b -> sum carry | FA a b cin -> sum carry | CONST0/CONST1 -> out
"""

from __future__ import annotations

from collections import Counter, defaultdict, deque
from contextlib import contextmanager
from dataclasses import dataclass, field

# kind -> (input count, output count)
GATE_KINDS = {
    "INV": (1, 1),
    "AND2": (2, 1),
    "OR2": (2, 1),
    "XOR2": (2, 1),
    "NAND2": (2, 1),
    "NOR2": (2, 1),
    "HA": (2, 2),
    "FA": (3, 2),
    "MUX2": (3, 1),
    "CONST0": (0, 1),
    "CONST1": (0, 1),
}


class NetlistError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    tag: str = ""


@dataclass(frozen=True)
class Port:
    name: str
    nets: tuple[int, ...]
    signed: bool = False

    @property
    def width(self) -> int:
        return len(self.nets)


@dataclass(frozen=True, eq=False)
class Netlist:
    name: str
    inputs: tuple[Port, ...]
    outputs: tuple[Port, ...]
    gates: tuple[Gate, ...]
    num_nets: int
    interface: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def input_port(self, name: str) -> Port:
        for p in self.inputs:
            if p.name == name:
                return p
        raise KeyError(name)

    def output_port(self, name: str) -> Port:
        for p in self.outputs:
            if p.name == name:
                return p
        raise KeyError(name)

    def histogram(self) -> Counter:
        return Counter(g.kind for g in self.gates)

    def count(self, kinds=None, tag_prefix: str = "") -> int:
        return sum(
            1 for g in self.gates
            if (kinds is None or g.kind in kinds) and g.tag.startswith(tag_prefix)
        )

    def wire_count(self) -> int:
        """Point-to-point connections: one per gate input pin and output port bit."""
        return sum(len(g.inputs) for g in self.gates) + sum(p.width for p in self.outputs)

    def drivers(self) -> dict[int, object]:
        drv: dict[int, object] = {}
        for p in self.inputs:
            for n in p.nets:
                if n in drv:
                    raise NetlistError(f"net {n} has multiple drivers")
                drv[n] = p
        for g in self.gates:
            if g.kind not in GATE_KINDS:
                raise NetlistError(f"unknown gate kind {g.kind!r}")
            nin, nout = GATE_KINDS[g.kind]
            if len(g.inputs) != nin or len(g.outputs) != nout:
                raise NetlistError(f"{g.kind} needs {nin} inputs and {nout} outputs")
            for n in g.outputs:
                if n in drv:
                    raise NetlistError(f"net {n} has multiple drivers")
                drv[n] = g
        return drv

    def topological_order(self) -> list[Gate]:
        """Kahn ordering of the gates; raises on cycles or floating inputs."""
        drv = self.drivers()
        for g in self.gates:
            for n in g.inputs:
                if n not in drv:
                    raise NetlistError(f"gate input net {n} is floating")
        for p in self.outputs:
            for n in p.nets:
                if n not in drv:
                    raise NetlistError(f"output {p.name} bit net {n} is undriven")
        index = {id(g): k for k, g in enumerate(self.gates)}
        pending = {}
        users = defaultdict(list)
        for k, g in enumerate(self.gates):
            deps = {id(drv[n]) for n in g.inputs if isinstance(drv[n], Gate)}
            pending[k] = len(deps)
            for d in deps:
                users[index[d]].append(k)
        ready = deque(k for k, c in pending.items() if c == 0)
        order = []
        while ready:
            k = ready.popleft()
            order.append(self.gates[k])
            for u in users[k]:
                pending[u] -= 1
                if pending[u] == 0:
                    ready.append(u)
        if len(order) != len(self.gates):
            raise NetlistError("combinational cycle detected")
        return order

    def validate(self) -> None:
        self.topological_order()


class Builder:
    """Emits gates in topological order, folding constants as it goes."""

    def __init__(self, name: str):
        self.name = name
        self._gates: list[Gate] = []
        self._inputs: list[Port] = []
        self._outputs: list[Port] = []
        self._n = 0
        self._const: dict[int, int] = {}
        self._const_net: dict[int, int] = {}
        self.tag = ""
        self.interface: Counter = Counter()
        self.meta: dict = {}

    def _new(self) -> int:
        self._n += 1
        return self._n - 1

    @contextmanager
    def scope(self, tag: str):
        prev, self.tag = self.tag, tag
        try:
            yield
        finally:
            self.tag = prev

    def input(self, name: str, width: int, signed: bool = False) -> list[int]:
        nets = [self._new() for _ in range(width)]
        self._inputs.append(Port(name, tuple(nets), signed))
        return nets

    def output(self, name: str, nets, signed: bool = False) -> None:
        self._outputs.append(Port(name, tuple(nets), signed))

    def _emit(self, kind: str, *ins: int) -> tuple[int, ...]:
        outs = tuple(self._new() for _ in range(GATE_KINDS[kind][1]))
        self._gates.append(Gate(kind, tuple(ins), outs, self.tag))
        return outs

    def const(self, bit: int) -> int:
        bit = int(bool(bit))
        if bit not in self._const_net:
            (n,) = self._emit("CONST1" if bit else "CONST0")
            self._const_net[bit] = n
            self._const[n] = bit
        return self._const_net[bit]

    def value(self, net: int):
        """0 or 1 for constant nets, None otherwise."""
        return self._const.get(net)

    def inv(self, a: int) -> int:
        if (v := self.value(a)) is not None:
            return self.const(1 - v)
        return self._emit("INV", a)[0]

    def and2(self, a: int, b: int) -> int:
        va, vb = self.value(a), self.value(b)
        if va == 0 or vb == 0:
            return self.const(0)
        if va == 1:
            return b
        if vb == 1 or a == b:
            return a
        return self._emit("AND2", a, b)[0]

    def or2(self, a: int, b: int) -> int:
        va, vb = self.value(a), self.value(b)
        if va == 1 or vb == 1:
            return self.const(1)
        if va == 0:
            return b
        if vb == 0 or a == b:
            return a
        return self._emit("OR2", a, b)[0]

    def xor2(self, a: int, b: int) -> int:
        va, vb = self.value(a), self.value(b)
        if a == b:
            return self.const(0)
        if va is not None and vb is not None:
            return self.const(va ^ vb)
        if va is not None:
            return b if va == 0 else self.inv(b)
        if vb is not None:
            return a if vb == 0 else self.inv(a)
        return self._emit("XOR2", a, b)[0]

    def ha(self, a: int, b: int) -> tuple[int, int]:
        va, vb = self.value(a), self.value(b)
        if va is not None and vb is not None:
            return self.const(va ^ vb), self.const(va & vb)
        if va is not None:
            a, b, va, vb = b, a, vb, va
        if vb == 0:
            return a, self.const(0)
        if vb == 1:
            return self.inv(a), a
        return self._emit("HA", a, b)

    def fa(self, a: int, b: int, c: int) -> tuple[int, int]:
        ins = [a, b, c]
        consts = [x for x in ins if self.value(x) is not None]
        if not consts:
            return self._emit("FA", a, b, c)
        k = consts[0]
        rest = list(ins)
        rest.remove(k)
        x, y = rest
        if self.value(k) == 0:
            return self.ha(x, y)
        # constant one: sum = xnor(x, y), carry = x | y
        return self.inv(self.xor2(x, y)), self.or2(x, y)

    def mux2(self, sel: int, a: int, b: int) -> int:
        """``sel ? b : a``."""
        vs, va, vb = self.value(sel), self.value(a), self.value(b)
        if vs is not None:
            return b if vs else a
        if a == b:
            return a
        if va is not None and vb is not None:
            return sel if vb else self.inv(sel)
        if va == 0:
            return self.and2(sel, b)
        if vb == 0:
            return self.and2(self.inv(sel), a)
        if va == 1:
            return self.or2(self.inv(sel), b)
        if vb == 1:
            return self.or2(sel, a)
        return self._emit("MUX2", sel, a, b)[0]

    def finish(self) -> Netlist:
        """Remove logic that reaches no output, slim half-used cells, renumber nets."""
        live = {n for p in self._outputs for n in p.nets}
        kept = []
        for g in reversed(self._gates):
            used = [o in live for o in g.outputs]
            if not any(used):
                continue
            if g.kind == "HA" and not used[1]:
                kept.append(Gate("XOR2", g.inputs, (g.outputs[0],), g.tag))
            elif g.kind == "HA" and not used[0]:
                kept.append(Gate("AND2", g.inputs, (g.outputs[1],), g.tag))
            elif g.kind == "FA" and not used[1]:
                # carry unused: the sum is a 3-input parity
                t = self._new()
                kept.append(Gate("XOR2", (t, g.inputs[2]), (g.outputs[0],), g.tag))
                kept.append(Gate("XOR2", g.inputs[:2], (t,), g.tag))
            else:
                kept.append(g)
            live.update(g.inputs)
        expanded = kept[::-1]

        ids: dict[int, int] = {}

        def rn(n: int) -> int:
            if n not in ids:
                ids[n] = len(ids)
            return ids[n]

        inputs = tuple(Port(p.name, tuple(rn(n) for n in p.nets), p.signed) for p in self._inputs)
        gates = tuple(
            Gate(g.kind, tuple(rn(n) for n in g.inputs), tuple(rn(n) for n in g.outputs), g.tag)
            for g in expanded
        )
        outputs = tuple(Port(p.name, tuple(rn(n) for n in p.nets), p.signed) for p in self._outputs)
        nl = Netlist(self.name, inputs, outputs, gates, len(ids),
                     dict(sorted(self.interface.items())), self.meta)
        nl.validate()
        return nl

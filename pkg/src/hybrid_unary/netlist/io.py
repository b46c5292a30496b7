"""Netlist text format and structural Verilog export.

The text format is line oriented and fully deterministic::

    hybrid-unary-netlist 1
    name mlp_hybrid
    nets 42
    input x0 u 0 1 2
    output class_index u 40 41
    interface ADC_CMP 12
    meta {"mode": "hybrid", ...}
    gate FA l1.pop.h0 3 4 5 : 6 7

Port nets are listed LSB first; ``u``/``s`` marks unsigned or signed.
An empty gate tag is written as ``-``. ``meta`` is one line of JSON with
sorted keys.
"""

from __future__ import annotations

import json
from pathlib import Path

from .core import GATE_KINDS, Gate, Netlist, NetlistError, Port

MAGIC = "hybrid-unary-netlist"
VERSION = 1


def _port_line(kind: str, p: Port) -> str:
    return " ".join([kind, p.name, "s" if p.signed else "u", *map(str, p.nets)])


def dumps(nl: Netlist) -> str:
    lines = [f"{MAGIC} {VERSION}", f"name {nl.name}", f"nets {nl.num_nets}"]
    lines += [_port_line("input", p) for p in nl.inputs]
    lines += [_port_line("output", p) for p in nl.outputs]
    lines += [f"interface {k} {v}" for k, v in sorted(nl.interface.items())]
    lines.append("meta " + json.dumps(nl.meta, sort_keys=True, separators=(",", ":")))
    for g in nl.gates:
        lines.append(" ".join(["gate", g.kind, g.tag or "-", *map(str, g.inputs), ":",
                               *map(str, g.outputs)]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Netlist:
    lines = text.splitlines()
    if not lines or lines[0].split() != [MAGIC, str(VERSION)]:
        raise NetlistError("not a version-1 netlist file")
    name, nets, meta = "", 0, {}
    inputs, outputs, gates, interface = [], [], [], {}
    for lineno, line in enumerate(lines[1:], start=2):
        head, _, rest = line.partition(" ")
        try:
            if head == "name":
                name = rest
            elif head == "nets":
                nets = int(rest)
            elif head in ("input", "output"):
                pname, sign, *ids = rest.split()
                port = Port(pname, tuple(int(n) for n in ids), sign == "s")
                (inputs if head == "input" else outputs).append(port)
            elif head == "interface":
                cell, count = rest.split()
                interface[cell] = int(count)
            elif head == "meta":
                meta = json.loads(rest)
            elif head == "gate":
                kind, tag, *pins = rest.split()
                cut = pins.index(":")
                if kind not in GATE_KINDS:
                    raise NetlistError(f"unknown gate kind {kind!r}")
                gates.append(Gate(kind, tuple(int(n) for n in pins[:cut]),
                                  tuple(int(n) for n in pins[cut + 1:]),
                                  "" if tag == "-" else tag))
            elif line.strip():
                raise NetlistError(f"unknown record {head!r}")
        except (ValueError, json.JSONDecodeError) as exc:
            raise NetlistError(f"line {lineno}: {exc}") from None
    nl = Netlist(name, tuple(inputs), tuple(outputs), tuple(gates), nets, interface, meta)
    nl.validate()
    return nl


def save_netlist(nl: Netlist, path: str | Path) -> None:
    Path(path).write_text(dumps(nl))


def load_netlist(path: str | Path) -> Netlist:
    return loads(Path(path).read_text())


_PRIMITIVES = {"INV": "not", "AND2": "and", "OR2": "or", "XOR2": "xor",
               "NAND2": "nand", "NOR2": "nor"}


def to_verilog(nl: Netlist) -> str:
    """Gate-level Verilog-2001 module using built-in primitives and assigns."""
    # fully pruned ADC inputs have no bits and no Verilog port
    ins = [p for p in nl.inputs if p.width]
    ports = [p.name for p in ins] + [p.name for p in nl.outputs]
    out = [f"module {nl.name} ({', '.join(ports)});"]
    for kind, group in (("input", ins), ("output", nl.outputs)):
        for p in group:
            rng = f"[{p.width - 1}:0] " if p.width > 1 else ""
            out.append(f"  {kind} {'signed ' if p.signed else ''}{rng}{p.name};")
    out.append(f"  wire [{max(nl.num_nets, 1) - 1}:0] n;")
    for p in ins:
        for j, n in enumerate(p.nets):
            out.append(f"  assign n[{n}] = {p.name}" + (f"[{j}];" if p.width > 1 else ";"))
    for k, g in enumerate(nl.gates):
        o = [f"n[{x}]" for x in g.outputs]
        i = [f"n[{x}]" for x in g.inputs]
        if g.kind in _PRIMITIVES:
            out.append(f"  {_PRIMITIVES[g.kind]} g{k} ({', '.join(o + i)});")
        elif g.kind == "CONST0":
            out.append(f"  assign {o[0]} = 1'b0;")
        elif g.kind == "CONST1":
            out.append(f"  assign {o[0]} = 1'b1;")
        elif g.kind == "MUX2":
            out.append(f"  assign {o[0]} = {i[0]} ? {i[2]} : {i[1]};")
        elif g.kind == "HA":
            out.append(f"  assign {{{o[1]}, {o[0]}}} = {i[0]} + {i[1]};")
        elif g.kind == "FA":
            out.append(f"  assign {{{o[1]}, {o[0]}}} = {i[0]} + {i[1]} + {i[2]};")
        else:
            raise NetlistError(f"no Verilog mapping for {g.kind}")
    for p in nl.outputs:
        for j, n in enumerate(p.nets):
            out.append(f"  assign {p.name}" + (f"[{j}]" if p.width > 1 else "") + f" = n[{n}];")
    out.append("endmodule")
    return "\n".join(out) + "\n"

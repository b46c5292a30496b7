"""Area and power proxies from gate histograms under configurable coefficients.

A coefficient table is JSON::

    {"format": "hybrid-unary-coefficients", "version": 1, "id": "default-v1",
     "area":  {"INV": 1, "AND2": 1, ..., "ADC_CMP": 10},
     "power": {...}}

Weights are exact decimals or integers and are summed as fractions. The
encoder cell ``ENC`` may be omitted, in which case its weight is the cost of
the lowered thermometer-to-binary encoder under the same table.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .netlist.core import GATE_KINDS, Netlist
from .netlist.lowering import ADC_CELL, ENCODER_CELL, lower_encoder

COEFF_FORMAT = "hybrid-unary-coefficients"
COST_FORMAT = "hybrid-unary-cost"
VERSION = 1

_TWO_INPUT = ("INV", "AND2", "OR2", "XOR2", "NAND2", "NOR2")


class CoefficientError(ValueError):
    pass


class ComparisonError(ValueError):
    pass


def _frac(v) -> Fraction:
    if isinstance(v, float):
        v = repr(v)
    f = Fraction(v)
    if f < 0:
        raise CoefficientError("coefficients must be non-negative")
    return f


@dataclass(frozen=True)
class TechCoefficients:
    id: str
    area: dict
    power: dict

    def __post_init__(self):
        for name in ("area", "power"):
            table = {str(k): _frac(v) for k, v in getattr(self, name).items()}
            object.__setattr__(self, name, table)
        if not any(self.area.values()) and not any(self.power.values()):
            raise CoefficientError("at least one coefficient must be nonzero")

    @classmethod
    def default(cls) -> "TechCoefficients":
        base = {k: 1 for k in _TWO_INPUT} | {"HA": 2, "FA": 3, "MUX2": 3, "CONST0": 0,
                                             "CONST1": 0, ADC_CELL: 10}
        return cls("default-v1", dict(base), dict(base))

    def scaled(self, factor, id: str | None = None) -> "TechCoefficients":
        f = _frac(factor)
        return TechCoefficients(id or f"{self.id}x{f}", {k: v * f for k, v in self.area.items()},
                                {k: v * f for k, v in self.power.items()})

    def to_dict(self) -> dict:
        def enc(t):
            return {k: str(v) for k, v in sorted(t.items())}
        return {"format": COEFF_FORMAT, "version": VERSION, "id": self.id,
                "area": enc(self.area), "power": enc(self.power)}

    @classmethod
    def from_dict(cls, d: dict) -> "TechCoefficients":
        if d.get("format") != COEFF_FORMAT or d.get("version") != VERSION:
            raise CoefficientError("not a version-1 coefficient table")
        try:
            return cls(str(d["id"]), d["area"], d["power"])
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            raise CoefficientError(f"malformed coefficient table: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "TechCoefficients":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise CoefficientError(f"{path}: {exc}") from None


def _weights(kind: str, coeffs: TechCoefficients, input_bits: int) -> tuple[Fraction, Fraction]:
    if kind == ENCODER_CELL and ENCODER_CELL not in coeffs.area:
        enc = estimate(lower_encoder(input_bits), coeffs)
        return enc.area, enc.power
    try:
        return coeffs.area[kind], coeffs.power[kind]
    except KeyError:
        raise CoefficientError(f"no coefficient for cell kind {kind!r}") from None


@dataclass
class CostReport:
    name: str
    coefficients: str
    histogram: dict
    area: Fraction
    power: Fraction
    wires: int = 0
    groups: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"format": COST_FORMAT, "version": VERSION, "name": self.name,
                "coefficients": self.coefficients, "histogram": dict(sorted(self.histogram.items())),
                "area": str(self.area), "power": str(self.power),
                "area_float": float(self.area), "power_float": float(self.power),
                "wires": self.wires,
                "groups": {k: {"area": str(a), "power": str(p)}
                           for k, (a, p) in sorted(self.groups.items())}}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "CostReport":
        groups = {k: (Fraction(v["area"]), Fraction(v["power"])) for k, v in d["groups"].items()}
        return cls(d["name"], d["coefficients"], dict(d["histogram"]), Fraction(d["area"]),
                   Fraction(d["power"]), d["wires"], groups)


def _group(tag: str) -> str:
    head = tag.split(".")
    return ".".join(head[:2]) if head[0] in ("l1", "l2") else head[0] or "other"


def estimate(netlist: Netlist, coeffs: TechCoefficients) -> CostReport:
    """Exact weighted sum over gates plus interface cells (ADC comparators, encoders)."""
    k = int(netlist.meta.get("input_bits", 3))
    hist: Counter = Counter()
    groups: dict = {}
    area = power = Fraction(0)
    for g in netlist.gates:
        if g.kind not in GATE_KINDS:
            raise CoefficientError(f"unknown gate kind {g.kind!r}")
        a, p = _weights(g.kind, coeffs, k)
        hist[g.kind] += 1
        area += a
        power += p
        key = _group(g.tag)
        ga, gp = groups.get(key, (Fraction(0), Fraction(0)))
        groups[key] = (ga + a, gp + p)
    for cell, count in netlist.interface.items():
        if not count:
            continue
        a, p = _weights(cell, coeffs, k)
        hist[cell] += count
        area += a * count
        power += p * count
        groups[cell.lower()] = (a * count, p * count)
    return CostReport(netlist.name, coeffs.id, dict(hist), area, power,
                      netlist.wire_count(), groups)


def reduction(reference: Fraction, candidate: Fraction) -> Fraction:
    """``1 - candidate / reference`` (0 when the reference is 0)."""
    return 1 - Fraction(candidate) / reference if reference else Fraction(0)


def compare(reference: CostReport, candidates: list[CostReport]) -> list[dict]:
    """Per candidate, area and power reduction relative to ``reference``."""
    rows = []
    for c in candidates:
        if c.coefficients != reference.coefficients:
            raise ComparisonError(
                f"coefficient mismatch: {c.coefficients!r} vs {reference.coefficients!r}")
        rows.append({"name": c.name, "reference": reference.name, "area": c.area,
                     "power": c.power, "area_reduction": reduction(reference.area, c.area),
                     "power_reduction": reduction(reference.power, c.power)})
    return rows


def csv_rows(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{float(v):.6f}" if isinstance(v, Fraction) else v)
                    for k, v in r.items()})
    return buf.getvalue()

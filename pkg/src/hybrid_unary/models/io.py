"""Versioned text serialization for quantized and hybrid models.

The file is JSON with sorted keys. ``layers`` is a list so deeper models can
be added without a format break; version 1 always holds two layers.

    {"format": "hybrid-unary-model", "version": 1, "kind": "baseline" | "hybrid",
     "topology": {"inputs": I, "hidden": H, "classes": C},
     "fixed_point": {"input_bits": k, "weight_bits": w},
     "scales": {"input": N, "weight": S, "hidden": ...},
     "layers": [
        {"encoding": "binary", "weights": [[q, ...], ...], "bias": [...]}    # baseline layer 1
        {"encoding": "unary", "signs": [[...]], "counts": [[...]], "bias": [...]}  # hybrid layer 1
        {"encoding": "binary", "weights": [[...]], "bias": [...]}           # layer 2
     ]}

Weights are stored row-major as ``[input][neuron]``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fixed_point import FixedPointConfig, QuantizedMlp
from .hybrid import HybridModel
from .topology import Topology

FORMAT = "hybrid-unary-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _ints(a) -> list:
    return np.asarray(a, dtype=np.int64).tolist()


def model_to_dict(model: QuantizedMlp | HybridModel, extra: dict | None = None) -> dict:
    t, c = model.topology, model.config
    if isinstance(model, HybridModel):
        layer1 = {"encoding": "unary", "signs": _ints(model.sign1),
                  "counts": _ints(model.count1), "bias": _ints(model.b1)}
    else:
        layer1 = {"encoding": "binary", "weights": _ints(model.w1), "bias": _ints(model.b1)}
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "topology": {"inputs": t.inputs, "hidden": t.hidden, "classes": t.classes},
        "fixed_point": {"input_bits": c.input_bits, "weight_bits": c.weight_bits},
        "scales": {"input": c.levels, "weight": c.weight_scale, "hidden": model.hidden_scale},
        "layers": [layer1, {"encoding": "binary", "weights": _ints(model.w2), "bias": _ints(model.b2)}],
    }
    if extra:
        doc["meta"] = extra
    return doc


def model_from_dict(doc: dict) -> QuantizedMlp | HybridModel:
    if doc.get("format") != FORMAT:
        raise ModelFormatError("not a hybrid-unary model file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')}")
    t = Topology(**doc["topology"])
    c = FixedPointConfig(**doc["fixed_point"])
    l1, l2 = doc["layers"]
    if doc["kind"] == "hybrid":
        return HybridModel(t, c, l1["signs"], l1["counts"], l1["bias"], l2["weights"], l2["bias"])
    if doc["kind"] == "baseline":
        return QuantizedMlp(t, c, l1["weights"], l1["bias"], l2["weights"], l2["bias"])
    raise ModelFormatError(f"unknown model kind {doc['kind']!r}")


def dumps(model, extra: dict | None = None) -> str:
    return json.dumps(model_to_dict(model, extra), sort_keys=True, indent=1) + "\n"


def loads(text: str):
    try:
        return model_from_dict(json.loads(text))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None


def save_model(model, path: str | Path, extra: dict | None = None) -> None:
    Path(path).write_text(dumps(model, extra))


def load_model(path: str | Path):
    return loads(Path(path).read_text())


def load_model_meta(path: str | Path) -> dict:
    return json.loads(Path(path).read_text()).get("meta", {})

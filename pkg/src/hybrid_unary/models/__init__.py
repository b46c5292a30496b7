"""Model zoo: float training, fixed-point baseline, hybrid model, pow2 retraining."""

import numpy as np

from .fixed_point import (FixedPointConfig, QuantizedMlp, forward_baseline, input_levels,
                          quantize, round_half_away)
from .hybrid import HybridModel, forward_hybrid, to_hybrid
from .pow2 import ConversionStats, Pow2Config, pow2_codes, pow2_retrain, snap_pow2
from .topology import REFERENCE_ACCURACY, REFERENCE_SHAPES, Topology, TopologyError, infer_topology
from .recipe import fit_baseline
from .training import FloatMlp, TrainingError, TrainingParams, equalize, train_float


def evaluate_accuracy(model, dataset, split, which: str = "test") -> float:
    """Fraction of correctly classified rows in the train or test partition."""
    if which not in ("train", "test"):
        raise ValueError("which must be 'train' or 'test'")
    idx = np.asarray(split.train_indices if which == "train" else split.test_indices, dtype=np.int64)
    if len(idx) == 0:
        return 0.0
    pred = model.predict(dataset.features[idx])
    return float((pred == dataset.labels[idx]).mean())


__all__ = [
    "ConversionStats", "FixedPointConfig", "FloatMlp", "HybridModel", "Pow2Config",
    "QuantizedMlp", "REFERENCE_ACCURACY", "REFERENCE_SHAPES", "Topology", "TopologyError",
    "TrainingError", "TrainingParams", "equalize", "evaluate_accuracy", "fit_baseline", "forward_baseline", "forward_hybrid",
    "infer_topology", "input_levels", "pow2_codes", "pow2_retrain", "quantize",
    "round_half_away", "snap_pow2", "to_hybrid", "train_float",
]

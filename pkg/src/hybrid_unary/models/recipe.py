"""The training recipe shared by the pipeline and the estimator."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .fixed_point import FixedPointConfig, QuantizedMlp, quantize
from .topology import Topology
from .training import FloatMlp, TrainingParams, equalize, train_float


def fit_baseline(
    fit_levels: np.ndarray,
    fit_y: np.ndarray,
    val_levels: np.ndarray,
    val_y: np.ndarray,
    topology: Topology,
    config: FixedPointConfig = FixedPointConfig(),
    params: TrainingParams = TrainingParams(),
    seed: int = 0,
) -> tuple[FloatMlp, QuantizedMlp]:
    """Train in floating point on ADC-quantized inputs, then quantize.

    The float model is trained on ``levels / N`` so it sees exactly what the
    hardware sees, and is equalized before rounding so every layer uses the
    full weight grid.
    """
    n = config.levels
    limit = config.qmax / config.weight_scale
    params = replace(params, weight_clip=(config.qmin / config.weight_scale, limit))
    fm = train_float(np.asarray(fit_levels) / n, fit_y, topology, params, seed,
                     (np.asarray(val_levels) / n, np.asarray(val_y)))
    return fm, quantize(equalize(fm, limit), config)

"""scikit-learn style classifier wrapping the training and conversion recipe."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .models import (FixedPointConfig, Pow2Config, Topology, TrainingParams, fit_baseline,
                     input_levels, pow2_retrain, to_hybrid)
from .netlist import lower_full

VARIANTS = ("baseline", "hybrid", "hybrid+pow2")


class HybridUnaryMLPClassifier(ClassifierMixin, BaseEstimator):
    """Single-hidden-layer ReLU classifier compiled to fixed-point or hybrid form.

    ``X`` must already be scaled to [0, 1] (values outside are clipped by the
    ADC model). After ``fit``, ``model_`` is the integer model for
    ``variant`` and ``to_netlist()`` lowers it to gates.

    Parameters
    ----------
    hidden : int
        Hidden-layer width.
    variant : {"baseline", "hybrid", "hybrid+pow2"}
    input_bits, weight_bits : int
        ADC resolution k and weight code width w.
    validation_fraction : float
        Share of the training rows held out for early stopping and the
        pow2 accuracy guard.
    """

    def __init__(self, hidden=3, variant="hybrid", input_bits=3, weight_bits=5,
                 epochs=500, learning_rate=0.01, batch_size=32, patience=30, restarts=4,
                 pow2_threshold=0.01, pow2_epochs=2, validation_fraction=0.2,
                 random_state=0):
        self.hidden = hidden
        self.variant = variant
        self.input_bits = input_bits
        self.weight_bits = weight_bits
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.patience = patience
        self.restarts = restarts
        self.pow2_threshold = pow2_threshold
        self.pow2_epochs = pow2_epochs
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, y):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        seed = int(self.random_state or 0)
        fx = FixedPointConfig(self.input_bits, self.weight_bits)
        levels = input_levels(X, fx)

        n_val = int(len(y_idx) * self.validation_fraction)
        perm = np.random.default_rng([seed, 1]).permutation(len(y_idx))
        val, fit = np.sort(perm[:n_val]), np.sort(perm[n_val:])
        if n_val == 0:
            val = fit

        topo = Topology(X.shape[1], int(self.hidden), max(len(self.classes_), 1))
        params = TrainingParams(self.epochs, self.learning_rate, self.batch_size,
                                self.patience, restarts=self.restarts)
        self.float_model_, model = fit_baseline(levels[fit], y_idx[fit], levels[val], y_idx[val],
                                                topo, fx, params, seed)
        self.pow2_stats_ = None
        if self.variant != "baseline":
            model = to_hybrid(model)
        if self.variant == "hybrid+pow2":
            model, self.pow2_stats_ = pow2_retrain(
                model, levels[fit], y_idx[fit], levels[val], y_idx[val],
                Pow2Config(self.pow2_epochs, self.pow2_threshold), seed)
        self.model_ = model
        self.topology_ = topo
        return self

    def _levels(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return input_levels(X, self.model_.config)

    def decision_function(self, X) -> np.ndarray:
        """Integer output-layer sums, one column per class.

        With two classes this is the 1-D margin ``y1 - y0``; ties go to the
        first class, as in the argmax.
        """
        levels = self._levels(X)
        out = self.model_.forward_levels(levels)[1]
        return out[:, 1] - out[:, 0] if out.shape[1] == 2 else out

    def predict(self, X) -> np.ndarray:
        levels = self._levels(X)
        return self.classes_[self.model_.forward_levels(levels)[0]]

    def to_netlist(self):
        check_is_fitted(self, "model_")
        return lower_full(self.model_)

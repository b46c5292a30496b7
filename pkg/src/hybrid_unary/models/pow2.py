"""Layer-aware power-of-two retraining of the binary (output) layer.

Output neurons are visited one at a time. A neuron's weights are snapped to
the nearest value in ``{0, +-2^e}`` that the w-bit format can hold, the
still-free weights are retrained for a few epochs, and the step is undone if
validation accuracy falls more than ``T`` below where it started.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fixed_point import FixedPointConfig, round_half_away
from .training import train_output_layer

ORDERS = ("least_damage", "declaration")


@dataclass(frozen=True)
class Pow2Config:
    retrain_epochs: int = 2
    accuracy_threshold: float = 0.01
    neuron_order: str = "least_damage"
    learning_rate: float = 0.01

    def __post_init__(self):
        if self.retrain_epochs < 0 or self.accuracy_threshold < 0:
            raise ValueError("retrain_epochs and accuracy_threshold must be >= 0")
        if self.neuron_order not in ORDERS:
            raise ValueError(f"neuron_order must be one of {ORDERS}")


@dataclass
class ConversionStats:
    """``converted_fraction`` counts weights locked by accepted steps;
    ``pow2_fraction`` counts every final code on the power-of-two grid."""

    initial_accuracy: float
    final_accuracy: float
    converted_fraction: float
    pow2_fraction: float = 0.0
    accepted: list[int] = field(default_factory=list)
    reverted: list[int] = field(default_factory=list)
    order: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def pow2_codes(config: FixedPointConfig) -> np.ndarray:
    """All weight codes that are 0 or +-2^e within the w-bit range."""
    mags = [1 << e for e in range(config.weight_bits)]
    codes = {0}
    codes.update(m for m in mags if m <= config.qmax)
    codes.update(-m for m in mags if -m >= config.qmin)
    return np.array(sorted(codes), dtype=np.int64)


def is_pow2_code(code: int, config: FixedPointConfig) -> bool:
    return int(code) in set(pow2_codes(config).tolist())


def snap_pow2(codes, config: FixedPointConfig) -> np.ndarray:
    """Nearest power-of-two code; equidistant candidates resolve toward zero."""
    codes = np.asarray(codes, dtype=np.int64)
    cand = pow2_codes(config)
    dist = np.abs(codes[..., None] - cand)
    # smaller distance first, then smaller magnitude
    key = dist * (4 * config.weight_scale + 1) + np.abs(cand)
    return cand[np.argmin(key, axis=-1)]


def _accuracy(model, levels, y) -> Fraction:
    if len(y) == 0:
        return Fraction(0)
    return Fraction(int((model.forward_levels(levels)[0] == y).sum()), len(y))


def pow2_retrain(model, fit_levels, fit_y, val_levels, val_y,
                 config: Pow2Config = Pow2Config(), seed: int = 0):
    """Convert output-layer weights to powers of two under an accuracy guard.

    Works on either model kind (layer 1 is left untouched). Returns the new
    model and a ``ConversionStats``; the worst case is the input model.
    """
    fx = model.config
    s = fx.weight_scale
    scale = model.hidden_scale
    fit_y = np.asarray(fit_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    hidden = model.hidden_levels(fit_levels).astype(np.float64) / scale
    rng = np.random.default_rng([seed, 3])
    threshold = Fraction(str(config.accuracy_threshold))

    initial = _accuracy(model, val_levels, val_y)
    snapped = snap_pow2(model.w2, fx)
    if config.neuron_order == "least_damage":
        damage = np.abs(model.w2 - snapped).sum(axis=0)
        order = sorted(range(model.topology.classes), key=lambda c: (int(damage[c]), c))
    else:
        order = list(range(model.topology.classes))

    frozen = np.zeros(model.w2.shape, dtype=bool)
    current = model
    accepted, reverted = [], []
    for c in order:
        w2 = current.w2.copy()
        w2[:, c] = snap_pow2(w2[:, c], fx)
        trial_frozen = frozen.copy()
        trial_frozen[:, c] = True
        wf, bf = train_output_layer(
            hidden, fit_y, w2 / s, current.b2 / (scale * s), trial_frozen,
            config.retrain_epochs, rng, learning_rate=config.learning_rate,
            weight_clip=(fx.qmin / s, fx.qmax / s),
        )
        new_w2 = np.where(trial_frozen, w2, round_half_away(wf * s))
        new_w2 = np.clip(new_w2, fx.qmin, fx.qmax)
        trial = current.replace(w2=new_w2, b2=round_half_away(bf * scale * s))
        if _accuracy(trial, val_levels, val_y) < initial - threshold:
            reverted.append(c)
            continue
        current, frozen = trial, trial_frozen
        accepted.append(c)

    pow2 = np.isin(current.w2, pow2_codes(fx))
    stats = ConversionStats(
        initial_accuracy=float(initial),
        final_accuracy=float(_accuracy(current, val_levels, val_y)),
        converted_fraction=float(frozen.mean()) if frozen.size else 0.0,
        pow2_fraction=float(pow2.mean()) if pow2.size else 0.0,
        accepted=accepted,
        reverted=reverted,
        order=order,
    )
    return current, stats

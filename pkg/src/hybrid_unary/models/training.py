"""Seeded numpy training for single-hidden-layer ReLU classifiers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import Topology


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingParams:
    epochs: int = 500
    learning_rate: float = 0.01
    batch_size: int = 32
    patience: int = 30
    weight_clip: tuple[float, float] = (-1.0, 0.9375)
    restarts: int = 4


@dataclass(eq=False)
class FloatMlp:
    topology: Topology
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    history: list = field(default_factory=list, repr=False)

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(np.atleast_2d(x)), axis=1)

    def copy(self) -> "FloatMlp":
        return FloatMlp(self.topology, self.w1.copy(), self.b1.copy(),
                        self.w2.copy(), self.b2.copy(), list(self.history))


def equalize(model: FloatMlp, limit: float = 0.9375) -> FloatMlp:
    """Rescale so each layer spans the weight grid without changing decisions.

    Hidden neuron h is scaled by ``limit / max|w1[:, h]|`` (ReLU commutes with
    positive scaling) and the inverse is folded into ``w2[h, :]``; layer 2 is
    then scaled as a whole, which argmax ignores.
    """
    out = model.copy()
    peak1 = np.abs(out.w1).max(axis=0)
    alpha = np.where(peak1 > 0, limit / np.where(peak1 > 0, peak1, 1.0), 1.0)
    out.w1 *= alpha
    out.b1 *= alpha
    out.w2 /= alpha[:, None]
    peak2 = np.abs(out.w2).max()
    if peak2 > 0:
        beta = limit / peak2
        out.w2 *= beta
        out.b2 *= beta
    return out


def init_mlp(topology: Topology, rng: np.random.Generator) -> FloatMlp:
    i, h, c = topology.inputs, topology.hidden, topology.classes
    w1 = rng.uniform(-1, 1, (i, h)) * np.sqrt(6.0 / (i + h))
    w2 = rng.uniform(-1, 1, (h, c)) * np.sqrt(6.0 / (h + c))
    return FloatMlp(topology, w1, np.full(h, 0.05), w2, np.zeros(c))


def _softmax_xent(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    n = len(y)
    loss = -np.log(p[np.arange(n), y] + 1e-12).mean()
    p[np.arange(n), y] -= 1.0
    return float(loss), p / n


class _Adam:
    def __init__(self, shapes, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _run(model, x, y, x_val, y_val, params, rng, select):
    lo, hi = params.weight_clip
    opt = _Adam([model.w1.shape, model.b1.shape, model.w2.shape, model.b2.shape],
                params.learning_rate)
    best, best_score, stale = model.copy(), select(model), 0
    n = len(y)
    for epoch in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = order[start:start + params.batch_size]
            xb, yb = x[idx], y[idx]
            z1 = xb @ model.w1 + model.b1
            h = np.maximum(z1, 0.0)
            loss, dz2 = _softmax_xent(h @ model.w2 + model.b2, yb)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            dz1 = (dz2 @ model.w2.T) * (z1 > 0)
            grads = [xb.T @ dz1, dz1.sum(0), h.T @ dz2, dz2.sum(0)]
            opt.step([model.w1, model.b1, model.w2, model.b2], grads)
            np.clip(model.w1, lo, hi, out=model.w1)
            np.clip(model.w2, lo, hi, out=model.w2)
        score = select(model)
        model.history.append(score)
        if score > best_score:
            best, best_score, stale = model.copy(), score, 0
        else:
            stale += 1
            if stale >= params.patience:
                break
    return best, best_score


def train_float(
    x: np.ndarray,
    y: np.ndarray,
    topology: Topology,
    params: TrainingParams = TrainingParams(),
    seed: int = 0,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    select=None,
) -> FloatMlp:
    """Mini-batch Adam on softmax cross-entropy, weights kept in the w-bit range.

    ``select(model) -> score`` ranks checkpoints (default: negative
    validation loss); training stops once it has not improved for
    ``patience`` epochs and the best checkpoint is returned. With several
    restarts the best-scoring run is kept. Zero epochs returns the seeded
    initialization untouched.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if validation is None:
        validation = (x, y)
    x_val, y_val = validation
    if select is None:
        def select(m):
            return -_softmax_xent(m.logits(x_val), y_val)[0] if len(y_val) else 0.0

    best, best_score = None, -np.inf
    for restart in range(max(1, params.restarts)):
        rng = np.random.default_rng([seed, 2, restart])
        model = init_mlp(topology, rng)
        if params.epochs == 0:
            return model
        model, score = _run(model, x, y, x_val, y_val, params, rng, select)
        if score > best_score:
            best, best_score = model, score
    return best


def train_output_layer(
    hidden: np.ndarray,
    y: np.ndarray,
    w2: np.ndarray,
    b2: np.ndarray,
    frozen: np.ndarray,
    epochs: int,
    rng: np.random.Generator,
    learning_rate: float = 0.01,
    batch_size: int = 32,
    weight_clip: tuple[float, float] = (-1.0, 0.9375),
) -> tuple[np.ndarray, np.ndarray]:
    """Retrain the output layer on fixed hidden activations.

    Entries where ``frozen`` is true keep their value exactly.
    """
    w2, b2 = np.array(w2, dtype=np.float64), np.array(b2, dtype=np.float64)
    keep = w2[frozen].copy()
    free = ~frozen
    opt = _Adam([w2.shape, b2.shape], learning_rate)
    n = len(y)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, dz = _softmax_xent(hidden[idx] @ w2 + b2, y[idx])
            if not np.isfinite(loss):
                raise TrainingError("non-finite loss while retraining")
            opt.step([w2, b2], [(hidden[idx].T @ dz) * free, dz.sum(0)])
            np.clip(w2, *weight_clip, out=w2)
            w2[frozen] = keep
    return w2, b2

"""Flat-vector model math: a softmax classifier trained with mini-batch SGD.

Parameters and updates are plain 1-D float64 numpy arrays.  The default
model is multinomial logistic regression; ``hidden_dim > 0`` inserts one
tanh layer.  Flat layout, in order:

    linear:  W (C x d), b (C)
    mlp:     W1 (h x d), b1 (h), W2 (C x h), b2 (C)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InvalidInputError


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    num_classes: int
    hidden_dim: int = 0
    learning_rate: float = 0.1
    local_epochs: int = 1
    batch_size: int = 32

    def __post_init__(self):
        if self.input_dim < 1:
            raise InvalidInputError("input_dim must be >= 1")
        if self.num_classes < 2:
            raise InvalidInputError("num_classes must be >= 2")
        if self.hidden_dim < 0:
            raise InvalidInputError("hidden_dim must be >= 0")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be > 0")
        if self.local_epochs < 1:
            raise InvalidInputError("local_epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")

    @property
    def num_params(self) -> int:
        d, c, h = self.input_dim, self.num_classes, self.hidden_dim
        if h == 0:
            return c * d + c
        return h * d + h + c * h + c


def as_vector(values) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ContractViolation(f"expected a non-empty 1-D vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ContractViolation("vector has non-finite entries")
    return vec


def check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")


def canonical_bytes(vec: np.ndarray) -> bytes:
    """Little-endian float64 bytes; used for byte-level determinism checks."""
    return np.ascontiguousarray(vec, dtype="<f8").tobytes()


def init_params(spec: ModelSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Zeros for the linear model.

    Zero weights leave a tanh layer stuck at its symmetric point, so the MLP
    draws its first-layer weights from ``rng`` (scaled by 1/sqrt(d)).
    """
    theta = np.zeros(spec.num_params)
    if spec.hidden_dim > 0:
        if rng is None:
            raise InvalidInputError("hidden_dim > 0 needs an rng for initialisation")
        h, d = spec.hidden_dim, spec.input_dim
        theta[: h * d] = rng.standard_normal(h * d) / np.sqrt(d)
    return theta


def _unpack(params: np.ndarray, spec: ModelSpec):
    d, c, h = spec.input_dim, spec.num_classes, spec.hidden_dim
    if h == 0:
        W = params[: c * d].reshape(c, d)
        b = params[c * d:]
        return W, b
    o = 0
    W1 = params[o:o + h * d].reshape(h, d)
    o += h * d
    b1 = params[o:o + h]
    o += h
    W2 = params[o:o + c * h].reshape(c, h)
    o += c * h
    b2 = params[o:o + c]
    return W1, b1, W2, b2


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_params(params: np.ndarray, spec: ModelSpec) -> None:
    if params.ndim != 1 or params.size != spec.num_params:
        raise ContractViolation(
            f"params has {params.size} entries, model expects {spec.num_params}")


def _check_batch(X: np.ndarray, y: np.ndarray, spec: ModelSpec) -> None:
    if len(y) == 0:
        raise InvalidInputError("empty batch")
    if X.shape[1] != spec.input_dim:
        raise ContractViolation(f"features have {X.shape[1]} columns, model expects {spec.input_dim}")
    if y.min() < 0 or y.max() >= spec.num_classes:
        raise InvalidInputError("label outside [0, num_classes)")


def predict_proba(params: np.ndarray, features: np.ndarray, spec: ModelSpec) -> np.ndarray:
    _check_params(params, spec)
    X = np.asarray(features, dtype=np.float64)
    if spec.hidden_dim == 0:
        W, b = _unpack(params, spec)
        return _softmax(X @ W.T + b)
    W1, b1, W2, b2 = _unpack(params, spec)
    return _softmax(np.tanh(X @ W1.T + b1) @ W2.T + b2)


def loss_and_gradient(params: np.ndarray, batch, spec: ModelSpec) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of ``batch`` and its exact gradient w.r.t. ``params``."""
    _check_params(params, spec)
    X = np.asarray(batch.features, dtype=np.float64)
    y = np.asarray(batch.labels, dtype=np.int64)
    _check_batch(X, y, spec)
    n = len(y)
    rows = np.arange(n)

    if spec.hidden_dim == 0:
        W, b = _unpack(params, spec)
        P = _softmax(X @ W.T + b)
        loss = -np.mean(np.log(P[rows, y]))
        D = P
        D[rows, y] -= 1.0
        D /= n
        return float(loss), np.concatenate([(D.T @ X).ravel(), D.sum(axis=0)])

    W1, b1, W2, b2 = _unpack(params, spec)
    H = np.tanh(X @ W1.T + b1)
    P = _softmax(H @ W2.T + b2)
    loss = -np.mean(np.log(P[rows, y]))
    D = P
    D[rows, y] -= 1.0
    D /= n
    gW2 = D.T @ H
    gb2 = D.sum(axis=0)
    DH = (D @ W2) * (1.0 - H * H)
    gW1 = DH.T @ X
    gb1 = DH.sum(axis=0)
    return float(loss), np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])


class _Batch:
    __slots__ = ("features", "labels")

    def __init__(self, features, labels):
        self.features = features
        self.labels = labels


def local_train(params: np.ndarray, shard, spec: ModelSpec,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Run ``local_epochs`` of shuffled mini-batch SGD from ``params``.

    Returns ``(updated, updated - params)``.
    """
    X = np.asarray(shard.features, dtype=np.float64)
    y = np.asarray(shard.labels, dtype=np.int64)
    if len(y) == 0:
        raise InvalidInputError("empty shard")
    theta = np.array(params, dtype=np.float64)
    n = len(y)
    for _ in range(spec.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = order[start:start + spec.batch_size]
            _, grad = loss_and_gradient(theta, _Batch(X[idx], y[idx]), spec)
            theta -= spec.learning_rate * grad
    return theta, theta - params


def evaluate_accuracy(params: np.ndarray, dataset, spec: ModelSpec) -> float:
    """Fraction of samples whose argmax prediction (lowest index on ties) is correct."""
    y = np.asarray(dataset.labels, dtype=np.int64)
    if len(y) == 0:
        raise InvalidInputError("empty dataset")
    pred = np.argmax(predict_proba(params, dataset.features, spec), axis=1)
    return float(np.count_nonzero(pred == y)) / len(y)

"""Single fully-connected layer on top of the shadow features.

Binary: sigmoid output trained with half mean-squared error.
Multi-class: softmax output trained with cross-entropy.

All gradient helpers work on one sample or a batch (leading axis); batch
gradients are the sample mean, matching the ``1/N`` and ``1/2N`` loss
prefactors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_EPS = 1e-12


class HeadShapeError(ValueError):
    """Feature or parameter dimensions do not line up."""


class EmptyBatchError(ValueError):
    pass


@dataclass
class HeadParams:
    weights: np.ndarray  # (K, F)
    bias: np.ndarray  # (K,)

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        self.bias = np.atleast_1d(np.asarray(self.bias, dtype=float))
        if self.bias.shape != (self.weights.shape[0],):
            raise HeadShapeError(
                f"bias shape {self.bias.shape} does not match weights {self.weights.shape}"
            )

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "HeadParams":
        return HeadParams(self.weights.copy(), self.bias.copy())

    def flatten(self) -> np.ndarray:
        """``[W row-major, b]`` as one vector of length ``K*F + K``."""
        return np.concatenate([self.weights.ravel(), self.bias])

    @classmethod
    def unflatten(cls, vector, n_outputs: int, n_features: int) -> "HeadParams":
        vector = np.asarray(vector, dtype=float)
        split = n_outputs * n_features
        if vector.shape != (split + n_outputs,):
            raise HeadShapeError(f"expected {split + n_outputs} values, got {vector.shape}")
        return cls(vector[:split].reshape(n_outputs, n_features).copy(), vector[split:].copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias)))


def init_head(n_outputs: int, n_features: int, rng: np.random.Generator, scale: float = 0.1) -> HeadParams:
    """Uniform ``[-scale, scale]`` initialization."""
    return HeadParams(
        rng.uniform(-scale, scale, size=(n_outputs, n_features)),
        rng.uniform(-scale, scale, size=n_outputs),
    )


@dataclass
class Prediction:
    probabilities: np.ndarray
    predicted_class: np.ndarray | int


def _logits(features, params: HeadParams) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != params.n_features:
        raise HeadShapeError(
            f"got {features.shape[-1]} features, head expects {params.n_features}"
        )
    return features @ params.weights.T + params.bias


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = np.asarray(z, dtype=float)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def forward_binary(features, params: HeadParams) -> Prediction:
    """``sigmoid(w . o + b)``; class 1 when the probability is at least 0.5."""
    if params.n_outputs != 1:
        raise HeadShapeError("binary head must have exactly one output")
    prob = sigmoid(_logits(features, params))[..., 0]
    cls = (prob >= 0.5).astype(int)
    if np.ndim(prob) == 0:
        return Prediction(np.array([float(prob)]), int(cls))
    return Prediction(prob, cls)


def forward_multi(features, params: HeadParams) -> Prediction:
    """Softmax over ``W o + b``; ties resolve to the lowest class index."""
    if params.n_outputs < 2:
        raise HeadShapeError("multi-class head needs at least two outputs")
    probs = softmax(_logits(features, params))
    cls = np.argmax(probs, axis=-1)
    if probs.ndim == 1:
        return Prediction(probs, int(cls))
    return Prediction(probs, cls)


def mse_loss(predictions, labels) -> float:
    """``(1/2N) sum (y_hat - y)^2``."""
    p = np.asarray(predictions, dtype=float).reshape(-1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if p.size == 0:
        raise EmptyBatchError("mse_loss of an empty batch")
    if p.shape != y.shape:
        raise HeadShapeError(f"{p.size} predictions vs {y.size} labels")
    return float(np.sum((p - y) ** 2) / (2 * p.size))


def ce_loss(predictions, one_hots) -> float:
    """Mean cross-entropy with ``log`` clamped below at ``log(1e-12)``."""
    p = np.atleast_2d(np.asarray(predictions, dtype=float))
    y = np.atleast_2d(np.asarray(one_hots, dtype=float))
    if p.shape[0] == 0:
        raise EmptyBatchError("ce_loss of an empty batch")
    if p.shape != y.shape:
        raise HeadShapeError(f"prediction shape {p.shape} vs label shape {y.shape}")
    logs = np.log(np.maximum(p, LOG_EPS))
    return float(-np.sum(y * logs) / p.shape[0])


def grads_binary(features, params: HeadParams, y_hat, y):
    """Gradients of the half-MSE loss.

    Returns ``(dL/dw, dL/db, dL/do)``. With batched inputs the first two are
    sample means and ``dL/do`` keeps one row per sample, already divided by
    the batch size, so it can be contracted directly with feature Jacobians.
    """
    o = np.asarray(features, dtype=float)
    if o.shape[-1] != params.n_features:
        raise HeadShapeError(f"got {o.shape[-1]} features, head expects {params.n_features}")
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    delta = (y_hat - y) * y_hat * (1.0 - y_hat)
    w = params.weights[0]
    if o.ndim == 1:
        return delta * o, float(delta), delta * w
    n = o.shape[0]
    d_w = (delta @ o) / n
    d_b = float(np.sum(delta) / n)
    d_o = np.outer(delta, w) / n
    return d_w, d_b, d_o


def grads_multi(features, params: HeadParams, y_hat, true_class):
    """Gradients of the cross-entropy loss.

    Returns ``(dL/dW, dL/db, dL/do)``; batch conventions as in :func:`grads_binary`.
    """
    o = np.asarray(features, dtype=float)
    if o.shape[-1] != params.n_features:
        raise HeadShapeError(f"got {o.shape[-1]} features, head expects {params.n_features}")
    y_hat = np.asarray(y_hat, dtype=float)
    if y_hat.shape[-1] != params.n_outputs:
        raise HeadShapeError("prediction width does not match the head")
    delta = y_hat.copy()
    if o.ndim == 1:
        delta[int(true_class)] -= 1.0
        return np.outer(delta, o), delta, delta @ params.weights
    n = o.shape[0]
    delta[np.arange(n), np.asarray(true_class, dtype=int)] -= 1.0
    d_w = delta.T @ o / n
    d_b = delta.sum(axis=0) / n
    d_o = delta @ params.weights / n
    return d_w, d_b, d_o

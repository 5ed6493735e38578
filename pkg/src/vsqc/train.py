"""Training pipelines and evaluation.

``train_binary`` runs plain SGD on the shadow angles and the sigmoid head
simultaneously. ``train_multi`` does the same with a softmax head, then
freezes the angles and refines ``(W, b)`` with the whale optimizer on cached
training features, keeping the SGD head if the search does not beat it.

Samples are encoded once and reduced to per-window density matrices, so every
epoch only contracts small matrices with the current window observable (see
:mod:`vsqc.shadow`).
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import head as fc
from .data import Dataset
from .encode import encode_batch
from .shadow import ShadowLayer, build_template
from .woa import WoaConfig, optimize

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class TrainingDivergedError(FloatingPointError):
    """A loss or parameter became non-finite; ``state`` holds diagnostics."""

    def __init__(self, message: str, state: dict):
        super().__init__(f"{message}: {state}")
        self.state = state


@dataclass
class TrainConfig:
    n_qubits: int = 10
    n_qsc: int = 2
    depth: int = 3
    variant: str = "circuit5"
    n_shadow: int = 1
    epochs: int = 20
    learning_rate: float = 0.09
    batch_size: int = 20
    n_train: int = 1000
    n_test: int = 200
    n_val: int = 0
    seed: int = 0
    digits: tuple[int, ...] = (0, 1)
    woa: WoaConfig = field(default_factory=WoaConfig)
    woa_fitness: str = "train"

    def __post_init__(self):
        self.digits = tuple(int(d) for d in self.digits)
        if isinstance(self.woa, dict):
            self.woa = WoaConfig(**self.woa)
        if 2**self.n_qubits < 1 or self.n_qsc > self.n_qubits:
            raise ConfigError("n_qsc cannot exceed n_qubits")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be positive and epochs non-negative")
        if self.woa_fitness not in ("train", "val"):
            raise ConfigError("woa_fitness must be 'train' or 'val'")
        if self.woa_fitness == "val" and self.n_val < 1:
            raise ConfigError("woa_fitness='val' needs n_val > 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["digits"] = list(self.digits)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "woa" in d and isinstance(d["woa"], dict):
            d["woa"] = WoaConfig(**d["woa"])
        return cls(**d)

    def layer(self) -> ShadowLayer:
        return ShadowLayer(build_template(self.variant, self.n_qsc, self.depth), self.n_qubits, self.n_shadow)


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    loss: float
    confusion: np.ndarray

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["confusion"] = self.confusion.tolist()
        return d


@dataclass
class TrainResult:
    theta: np.ndarray
    head: fc.HeadParams
    history: list[dict]
    final_train: Metrics
    final_test: Metrics
    woa_trace: np.ndarray | None = None
    phase1_loss: float | None = None
    refined_loss: float | None = None
    woa_adopted: bool | None = None
    phase1_head: fc.HeadParams | None = None


@dataclass
class PreparedSet:
    """Window density matrices plus labels for one dataset."""

    rdms: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __len__(self):
        return len(self.labels)


def prepare(dataset: Dataset, config: TrainConfig) -> PreparedSet:
    amps = encode_batch(dataset.images, config.n_qubits)
    rdms = config.layer().rdms(amps)
    return PreparedSet(rdms, np.asarray(dataset.labels, dtype=np.int64), dataset.n_classes)


def _as_prepared(data, config: TrainConfig) -> PreparedSet:
    return data if isinstance(data, PreparedSet) else prepare(data, config)


def confusion_matrix(true, pred, n_classes: int) -> np.ndarray:
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (np.asarray(true, dtype=int), np.asarray(pred, dtype=int)), 1)
    return conf


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def metrics_from_confusion(conf, loss: float = 0.0) -> Metrics:
    """Accuracy plus precision/recall/F1 (class 1 for two classes, macro average otherwise).

    Rows are true classes, columns predictions. Undefined ratios count as 0.
    """
    conf = np.asarray(conf)
    total = conf.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(conf).astype(float)
    precision = _safe_div(tp, conf.sum(axis=0).astype(float))
    recall = _safe_div(tp, conf.sum(axis=1).astype(float))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    if conf.shape[0] == 2:
        p, r, f = precision[1], recall[1], f1[1]
    else:
        p, r, f = precision.mean(), recall.mean(), f1.mean()
    return Metrics(
        accuracy=float(np.trace(conf) / total),
        precision=float(p),
        recall=float(r),
        f1=float(f),
        loss=float(loss),
        confusion=conf,
    )


def _predict(feats, head: fc.HeadParams, binary: bool):
    if binary:
        pred = fc.forward_binary(feats, head)
    else:
        pred = fc.forward_multi(feats, head)
    return pred.probabilities, np.asarray(pred.predicted_class)


def _loss(probs, labels, n_classes: int, binary: bool) -> float:
    if binary:
        return fc.mse_loss(probs, labels)
    return fc.ce_loss(probs, np.eye(n_classes)[labels])


def evaluate(dataset, theta, head: fc.HeadParams, config: TrainConfig) -> Metrics:
    """Deterministic pass over ``dataset`` (a :class:`Dataset` or :class:`PreparedSet`)."""
    prepared = _as_prepared(dataset, config)
    if len(prepared) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    binary = head.n_outputs == 1
    feats = config.layer().features(prepared.rdms, theta)
    probs, pred = _predict(feats, head, binary)
    n_classes = 2 if binary else head.n_outputs
    loss = _loss(probs, prepared.labels, n_classes, binary)
    return metrics_from_confusion(confusion_matrix(prepared.labels, pred, n_classes), loss)


def _streams(seed: int):
    init_seq, head_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(init_seq),
        np.random.default_rng(head_seq),
        np.random.default_rng(shuffle_seq),
    )


def _norms(theta, head):
    return {
        "theta_norm": float(np.linalg.norm(theta)),
        "weight_norm": float(np.linalg.norm(head.weights)),
        "bias_norm": float(np.linalg.norm(head.bias)),
    }


def batch_loss_and_grads(rdms, labels, theta, head: fc.HeadParams, layer: ShadowLayer, shift=None):
    """Mean loss of one batch and its gradients ``(d_theta, d_W, d_b)``.

    Sigmoid/MSE when ``head`` has one output, softmax/cross-entropy otherwise.
    """
    kwargs = {} if shift is None else {"shift": shift}
    feats, jac = layer.features_and_jacobian(rdms, theta, **kwargs)
    labels = np.asarray(labels)
    if head.n_outputs == 1:
        probs = fc.forward_binary(feats, head).probabilities
        loss = fc.mse_loss(probs, labels)
        d_w, d_b, d_o = fc.grads_binary(feats, head, probs, labels)
        d_w, d_b = d_w[None, :], np.array([d_b])
    else:
        probs = fc.forward_multi(feats, head).probabilities
        loss = fc.ce_loss(probs, np.eye(head.n_outputs)[labels])
        d_w, d_b, d_o = fc.grads_multi(feats, head, probs, labels)
    d_theta = np.einsum("bf,bfsp->sp", d_o, jac)
    return loss, d_theta, d_w, d_b


def _sgd(train: PreparedSet, test: PreparedSet, config: TrainConfig, n_outputs: int):
    layer = config.layer()
    init_rng, head_rng, shuffle_rng = _streams(config.seed)
    theta = init_rng.uniform(0.0, 2 * np.pi, size=layer.theta_shape)
    head = fc.init_head(n_outputs, layer.n_features, head_rng)
    lr = config.learning_rate
    history = []
    n = len(train)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            loss, d_theta, d_w, d_b = batch_loss_and_grads(
                train.rdms[idx], train.labels[idx], theta, head, layer
            )
            theta = theta - lr * d_theta
            head = fc.HeadParams(head.weights - lr * d_w, head.bias - lr * d_b)
            if not (np.isfinite(loss) and np.all(np.isfinite(theta)) and head.is_finite()):
                raise TrainingDivergedError(
                    "non-finite training state", {"epoch": epoch, "batch": b, "loss": loss, **_norms(theta, head)}
                )
            batch_losses.append(loss)
        tr = evaluate(train, theta, head, config)
        te = evaluate(test, theta, head, config)
        history.append(
            {
                "epoch": epoch,
                "train_loss": tr.loss,
                "mean_batch_loss": float(np.mean(batch_losses)) if batch_losses else float("nan"),
                "train_acc": tr.accuracy,
                "test_loss": te.loss,
                "test_acc": te.accuracy,
            }
        )
        logger.info(
            "epoch %d/%d  train_loss=%.4f  train_acc=%.4f  test_acc=%.4f",
            epoch, config.epochs, tr.loss, tr.accuracy, te.accuracy,
        )
    return theta, head, history


def train_binary(train_set, test_set, config: TrainConfig) -> TrainResult:
    train = _as_prepared(train_set, config)
    test = _as_prepared(test_set, config)
    if train.n_classes != 2:
        raise ConfigError(f"binary training needs exactly 2 classes, got {train.n_classes}")
    theta, head, history = _sgd(train, test, config, n_outputs=1)
    return TrainResult(
        theta=theta,
        head=head,
        history=history,
        final_train=evaluate(train, theta, head, config),
        final_test=evaluate(test, theta, head, config),
    )


def head_fitness(features: np.ndarray, labels, n_classes: int):
    """Cross-entropy of a flattened ``(W, b)`` on fixed features."""
    one_hots = np.eye(n_classes)[np.asarray(labels)]
    n_features = features.shape[1]

    def fitness(vector) -> float:
        params = fc.HeadParams.unflatten(vector, n_classes, n_features)
        return fc.ce_loss(fc.forward_multi(features, params).probabilities, one_hots)

    return fitness


def train_multi(train_set, test_set, config: TrainConfig, val_set=None) -> TrainResult:
    train = _as_prepared(train_set, config)
    test = _as_prepared(test_set, config)
    k = train.n_classes
    if k < 3:
        raise ConfigError(f"multi-class training needs at least 3 classes, got {k}")
    theta, head, history = _sgd(train, test, config, n_outputs=k)
    phase1_head = head.copy()

    layer = config.layer()
    train_feats = layer.features(train.rdms, theta)
    train_fitness = head_fitness(train_feats, train.labels, k)
    phase1_loss = train_fitness(head.flatten())

    if config.woa.max_iters > 0:
        if config.woa_fitness == "val":
            if val_set is None:
                raise ConfigError("woa_fitness='val' requires a validation set")
            val = _as_prepared(val_set, config)
            search_fitness = head_fitness(layer.features(val.rdms, theta), val.labels, k)
        else:
            search_fitness = train_fitness
        best, _, trace = optimize(search_fitness, head.flatten().size, config.woa, seed_solution=head.flatten())
        candidate = fc.HeadParams.unflatten(best, k, layer.n_features)
        refined_loss = train_fitness(candidate.flatten())
        # the seed may have been clamped into the box, so check rather than assume
        adopted = refined_loss <= phase1_loss
        if adopted:
            head = candidate
        else:
            logger.warning("WOA result (%.6g) worse than SGD head (%.6g); keeping SGD head", refined_loss, phase1_loss)
            refined_loss = phase1_loss
    else:
        trace = np.array([])
        refined_loss = phase1_loss
        adopted = False

    return TrainResult(
        theta=theta,
        head=head,
        history=history,
        final_train=evaluate(train, theta, head, config),
        final_test=evaluate(test, theta, head, config),
        woa_trace=trace,
        phase1_loss=phase1_loss,
        refined_loss=refined_loss,
        woa_adopted=adopted,
        phase1_head=phase1_head,
    )

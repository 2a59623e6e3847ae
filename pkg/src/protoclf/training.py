"""Linear softmax head, multi-objective self-learning loss, label adjustment.

The head is the only trainable component; embeddings are fixed inputs. The
total loss mixes three cross-entropy terms per batch: the (possibly
adjusted) label term weighted 1-(alpha+beta), and the difficult/anomaly
pseudo-label terms weighted alpha and beta. Optimization is plain mini-batch
gradient descent with decoupled weight decay on W, zero init, no momentum:
deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from protoclf.data import Dataset
from protoclf.metrics import softmax
from protoclf.prototypes import PrototypeSet, mean_similarity_scores, pseudo_labels_all

CE_FLOOR = 1e-12  # numerical guard for -log(p), not a semantic choice

_PRELIM_TAG = 0x9E1
_TRAIN_TAG = 0x7A1


class ConfigError(ValueError):
    """Raised when a training/generation config violates an invariant."""


@dataclass
class ClassifierHead:
    """Weight matrix (dim x classes) and bias (classes,) of the softmax head."""

    W: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros(cls, dim: int, classes: int) -> "ClassifierHead":
        return cls(W=np.zeros((dim, classes)), b=np.zeros(classes))

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def classes(self) -> int:
        return self.W.shape[1]

    def logits(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def save(self, path: str | Path) -> None:
        obj = {
            "dim": self.dim,
            "classes": self.classes,
            "W": [[float(v) for v in row] for row in self.W],
            "b": [float(v) for v in self.b],
        }
        Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierHead":
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"missing file: {p}")
        obj = json.loads(p.read_text())
        W = np.asarray(obj["W"], dtype=np.float64)
        b = np.asarray(obj["b"], dtype=np.float64)
        if W.shape != (obj["dim"], obj["classes"]) or b.shape != (obj["classes"],):
            raise ConfigError("head.json shapes are inconsistent")
        return cls(W=W, b=b)


@dataclass
class TrainConfig:
    """Hyperparameters of the self-learning trainer.

    alpha and beta weight the difficult/anomaly pseudo-label terms and must
    satisfy alpha, beta >= 0 and alpha + beta < 1.
    """

    alpha: float = 0.2
    beta: float = 0.3
    lr: float = 0.1
    weight_decay: float = 5e-5
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    s_c_percentile: float = 20.0
    preliminary_epochs: int = 2
    adjust_labels: bool = False

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta >= 1.0:
            raise ConfigError(
                f"weight factors must satisfy alpha, beta >= 0 and alpha + beta < 1 "
                f"(got alpha={self.alpha}, beta={self.beta})"
            )
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.epochs < 0 or self.preliminary_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if not 0.0 < self.s_c_percentile < 100.0:
            raise ConfigError("s_c percentile must be in (0, 100)")


def forward(head: ClassifierHead, x: np.ndarray) -> np.ndarray:
    """Softmax class probabilities for one embedding."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(head.W)) or not np.all(np.isfinite(head.b)):
        raise FloatingPointError("head parameters are non-finite")
    return softmax(x @ head.W + head.b)


def ce_loss(probs: np.ndarray, label: int) -> float:
    """Cross entropy -log p[label], with p floored at 1e-12 before the log."""
    p = max(float(probs[label]), CE_FLOOR)
    return float(-np.log(p))


def _ce_rows(P: np.ndarray, labels: np.ndarray) -> np.ndarray:
    picked = P[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, CE_FLOOR))


def _loss_terms(
    head: ClassifierHead,
    X: np.ndarray,
    labels: np.ndarray,
    zc: np.ndarray,
    za: np.ndarray,
    alpha: float,
    beta: float,
) -> tuple[float, float, float, float]:
    P = softmax(head.logits(X))
    ce = float(_ce_rows(P, labels).mean())
    pc = float(_ce_rows(P, zc).mean())
    pa = float(_ce_rows(P, za).mean())
    total = (1.0 - (alpha + beta)) * ce + alpha * pc + beta * pa
    return total, ce, pc, pa


def total_loss(
    head: ClassifierHead,
    X: np.ndarray,
    labels: np.ndarray,
    zc: np.ndarray,
    za: np.ndarray,
    alpha: float,
    beta: float,
) -> float:
    """Batch objective: (1-(a+b)) * mean CE(labels) + mean[a*CE(zc) + b*CE(za)].

    `labels` are the adjusted labels when adjustment is on, the noisy ones
    otherwise; the caller picks.
    """
    if alpha < 0 or beta < 0 or alpha + beta >= 1.0:
        raise ConfigError("alpha, beta must be >= 0 with alpha + beta < 1")
    return _loss_terms(head, X, labels, zc, za, alpha, beta)[0]


def loss_and_grads(
    head: ClassifierHead,
    X: np.ndarray,
    labels: np.ndarray,
    zc: np.ndarray,
    za: np.ndarray,
    alpha: float,
    beta: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Total loss and its analytic gradient w.r.t. W and b (no weight decay)."""
    X = np.asarray(X, dtype=np.float64)
    m, classes = len(labels), head.classes
    P = softmax(head.logits(X))
    T = np.zeros((m, classes))
    T[np.arange(m), labels] += 1.0 - (alpha + beta)
    T[np.arange(m), zc] += alpha
    T[np.arange(m), za] += beta
    G = (P - T) / m
    dW = X.T @ G
    db = G.sum(axis=0)
    loss = _loss_terms(head, X, labels, zc, za, alpha, beta)[0]
    return loss, dW, db


def fit_head(
    X: np.ndarray,
    labels: np.ndarray,
    zc: np.ndarray,
    za: np.ndarray,
    cfg: TrainConfig,
    epochs: int,
    rng_tag: int,
) -> tuple[ClassifierHead, list[dict]]:
    """Mini-batch gradient descent from zero init; returns head + epoch trace."""
    X = np.asarray(X, dtype=np.float64)
    n = len(labels)
    classes = int(max(labels.max(initial=0), zc.max(initial=0), za.max(initial=0))) + 1
    head = ClassifierHead.zeros(X.shape[1], classes)
    rng = np.random.default_rng([cfg.seed, rng_tag])
    trace: list[dict] = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        for batch, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            loss, dW, db = loss_and_grads(
                head, X[idx], labels[idx], zc[idx], za[idx], cfg.alpha, cfg.beta
            )
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"training diverged: non-finite loss at epoch {epoch}, batch {batch}"
                )
            head.W -= cfg.lr * (dW + cfg.weight_decay * head.W)
            head.b -= cfg.lr * db
        if not (np.all(np.isfinite(head.W)) and np.all(np.isfinite(head.b))):
            raise FloatingPointError(f"training diverged: non-finite parameters after epoch {epoch}")
        # end-of-epoch objective over the whole training set
        total, ce, pc, pa = _loss_terms(head, X, labels, zc, za, cfg.alpha, cfg.beta)
        trace.append(
            {"epoch": epoch, "total": total, "ce": ce, "proto_c": pc, "proto_a": pa}
        )
    return head, trace


def preliminary_train(
    dataset: Dataset, cfg: TrainConfig, members: np.ndarray | None = None
) -> np.ndarray:
    """Plain-CE fit on noisy labels, then pre-softmax logits for every sample.

    `members` restricts which samples are trained on (e.g. a train split);
    logits are still emitted for the whole dataset.
    """
    idx = np.arange(dataset.n) if members is None else np.asarray(members, dtype=np.int64)
    X = dataset.embeddings[idx].astype(np.float64)
    y = dataset.noisy_labels[idx]
    prelim_cfg = TrainConfig(
        alpha=0.0,
        beta=0.0,
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        batch_size=cfg.batch_size,
        epochs=cfg.preliminary_epochs,
        seed=cfg.seed,
        s_c_percentile=cfg.s_c_percentile,
        preliminary_epochs=cfg.preliminary_epochs,
    )
    head, _ = fit_head(X, y, y, y, prelim_cfg, cfg.preliminary_epochs, _PRELIM_TAG)
    if head.classes < dataset.classes:  # pad classes never seen in `members`
        W = np.zeros((dataset.dim, dataset.classes))
        b = np.zeros(dataset.classes)
        W[:, : head.classes] = head.W
        b[: head.classes] = head.b
        head = ClassifierHead(W=W, b=b)
    return head.logits(dataset.embeddings.astype(np.float64))


@dataclass
class AdjustedLabels:
    """Result of prototype-based label adjustment."""

    adjusted: np.ndarray          # (n,) int64
    changed: np.ndarray           # (n,) bool
    scores: np.ndarray            # (n, classes) mean similarity to difficult lists
    margin: float = 0.0

    def save(self, path: str | Path, dataset: Dataset) -> None:
        obj: dict = {"noisy": [int(v) for v in self.adjusted]}
        if dataset.clean_labels is not None:
            obj["clean"] = [int(v) for v in dataset.clean_labels]
        obj["changed"] = [bool(v) for v in self.changed]
        Path(path).write_text(json.dumps(obj, sort_keys=True) + "\n")


def adjust_labels(
    dataset: Dataset, prototypes: PrototypeSet, margin: float = 0.0
) -> AdjustedLabels:
    """Relabel each sample with the class of maximal difficult-prototype similarity.

    With margin > 0, a sample is only adjusted when the top similarity
    exceeds the runner-up by at least the margin; margin 0 adjusts every
    sample (ties go to the lowest class index).
    """
    for c in range(dataset.classes):
        if not prototypes.difficult.get(c):
            raise ValueError(f"class {c} has no difficult prototypes")
    scores = mean_similarity_scores(dataset, prototypes.difficult)
    order = np.sort(scores, axis=1)
    top_margin = order[:, -1] - order[:, -2]
    proposal = scores.argmax(axis=1).astype(np.int64)
    keep = top_margin < margin
    adjusted = np.where(keep, dataset.noisy_labels, proposal)
    changed = adjusted != dataset.noisy_labels
    return AdjustedLabels(adjusted=adjusted, changed=changed, scores=scores, margin=margin)


def train(
    dataset: Dataset,
    prototypes: PrototypeSet,
    cfg: TrainConfig,
    members: np.ndarray | None = None,
    anomaly_label_pool: str = "union",
    adjusted: AdjustedLabels | None = None,
) -> tuple[ClassifierHead, list[dict]]:
    """Full self-learning fit: pseudo-labels from prototypes, then the
    multi-objective mini-batch descent.

    `members` restricts training to a subset of rows (pseudo-labels are
    computed on the full dataset, which is deterministic and side-effect
    free). When cfg.adjust_labels is set, the label term uses the adjusted
    labels (computed here unless passed in).
    """
    zc = pseudo_labels_all(dataset, prototypes, "difficult")
    za = pseudo_labels_all(dataset, prototypes, anomaly_label_pool)
    if cfg.adjust_labels:
        if adjusted is None:
            adjusted = adjust_labels(dataset, prototypes)
        labels = adjusted.adjusted
    else:
        labels = dataset.noisy_labels
    idx = np.arange(dataset.n) if members is None else np.asarray(members, dtype=np.int64)
    X = dataset.embeddings[idx].astype(np.float64)
    head, trace = fit_head(X, labels[idx], zc[idx], za[idx], cfg, cfg.epochs, _TRAIN_TAG)
    if head.classes < dataset.classes:
        W = np.zeros((dataset.dim, dataset.classes))
        b = np.zeros(dataset.classes)
        W[:, : head.classes] = head.W
        b[: head.classes] = head.b
        head = ClassifierHead(W=W, b=b)
    return head, trace


def save_loss_trace(trace: list[dict], path: str | Path) -> None:
    lines = ["epoch,total,ce,proto_c,proto_a"]
    for row in trace:
        lines.append(
            f"{row['epoch']},{float(row['total'])!r},{float(row['ce'])!r},"
            f"{float(row['proto_c'])!r},{float(row['proto_a'])!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")

"""Similarity, proximity and confidence: the three selection coordinates.

Similarity is pairwise cosine over a class's members (optionally a random
subsample), proximity counts how many of those similarities clear a
percentile threshold s_c, and confidence is the margin between the two
largest entries of a 0-1 scaled logit vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from protoclf.data import Dataset


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric cosine-similarity matrix over a fixed index set."""

    indices: np.ndarray  # (m,) row ids into the dataset
    values: np.ndarray   # (m, m) float64, symmetric, diag ~1, entries in [-1, 1]

    @property
    def m(self) -> int:
        return len(self.indices)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two nonzero vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def similarity_matrix(dataset: Dataset, indices: np.ndarray) -> SimilarityMatrix:
    """Pairwise cosine similarities over the given sample ids.

    The upper triangle is computed once and mirrored, so the result is
    exactly symmetric regardless of float rounding.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) < 2:
        raise ValueError("similarity_matrix needs at least 2 indices")
    X = dataset.embeddings[indices].astype(np.float64)
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
    full = np.clip(Xn @ Xn.T, -1.0, 1.0)
    vals = np.triu(full)
    vals = vals + np.triu(vals, k=1).T
    return SimilarityMatrix(indices=indices, values=vals)


def threshold_s_c(matrix: SimilarityMatrix, percentile: float = 20.0) -> float:
    """Nearest-rank percentile of the strict upper-triangle similarities."""
    if not 0.0 < percentile < 100.0:
        raise ValueError("percentile must be in (0, 100)")
    iu = np.triu_indices(matrix.m, k=1)
    vals = np.sort(matrix.values[iu])
    rank = max(1, int(np.ceil(percentile / 100.0 * len(vals))))
    return float(vals[rank - 1])


def proximity(matrix: SimilarityMatrix, s_c: float) -> np.ndarray:
    """Signed neighbour count per sample: sum_j sign(s_ij - s_c), j runs
    over the whole matrix row including j = i; sign(0) = 0."""
    return np.sign(matrix.values - s_c).sum(axis=1).astype(np.int64)


def scale_logits(raw: np.ndarray) -> np.ndarray:
    """Per-sample min-max scaling of a logit vector to [0, 1].

    A constant vector maps to all 0.5 so that its confidence is 0
    (maximal indecision) rather than undefined.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or len(raw) < 2:
        raise ValueError("scale_logits expects a vector of length >= 2")
    if not np.all(np.isfinite(raw)):
        raise ValueError("non-finite logits")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.full_like(raw, 0.5)
    return (raw - lo) / (hi - lo)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise numerically stable softmax."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def confidence(scaled: np.ndarray) -> float:
    """Margin between the two largest entries of a 0-1 scaled logit vector."""
    scaled = np.asarray(scaled, dtype=np.float64)
    if len(scaled) < 2:
        raise ValueError("confidence needs at least 2 entries")
    top = np.sort(scaled)[-2:]
    return float(abs(top[1] - top[0]))


def confidence_from_logits(logits: np.ndarray | None, n: int, scaling: str = "softmax") -> np.ndarray:
    """Per-sample confidence for selection.

    With no logits available every sample gets confidence 1.0, which turns
    the confidence criterion into an all-way tie instead of blocking
    selection. `scaling` picks the 0-1 transform applied to each logit row:
    "softmax" (default; the margin of the predicted distribution) or
    "minmax" (per-row min-max).
    """
    if logits is None:
        return np.ones(n, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    if scaling == "softmax":
        scaled = softmax(logits)
    elif scaling == "minmax":
        scaled = np.empty_like(logits)
        for i in range(len(logits)):
            scaled[i] = scale_logits(logits[i])
    else:
        raise ValueError(f"unknown confidence scaling {scaling!r}")
    part = np.sort(scaled, axis=1)
    return np.abs(part[:, -1] - part[:, -2])


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class bundle of the selection coordinates.

    `indices` are dataset row ids of the class members covered (all of the
    class, or its subsample); `proximity` and `confidence` are parallel to
    `indices`.
    """

    class_index: int
    matrix: SimilarityMatrix
    s_c: float
    proximity: np.ndarray   # (m,) int64
    confidence: np.ndarray  # (m,) float64

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices


def compute_class_metrics(
    dataset: Dataset,
    class_index: int,
    s_c_percentile: float = 20.0,
    members: np.ndarray | None = None,
    confidence_scaling: str = "softmax",
) -> ClassMetrics:
    """Similarity matrix, threshold, proximity and confidence for one class.

    `members` restricts the pool (e.g. a subsample or a train split); by
    default all samples whose noisy label equals `class_index` are used.
    """
    if members is None:
        members = np.where(dataset.noisy_labels == class_index)[0]
    members = np.asarray(members, dtype=np.int64)
    if len(members) == 0:
        raise ValueError(f"class {class_index} has no members")
    conf_all = confidence_from_logits(dataset.logits, dataset.n, confidence_scaling)
    if len(members) == 1:
        # degenerate one-member class: no pairwise structure
        mat = SimilarityMatrix(indices=members, values=np.ones((1, 1)))
        return ClassMetrics(class_index, mat, 1.0, np.zeros(1, dtype=np.int64), conf_all[members])
    mat = similarity_matrix(dataset, members)
    s_c = threshold_s_c(mat, s_c_percentile)
    prox = proximity(mat, s_c)
    return ClassMetrics(class_index, mat, s_c, prox, conf_all[members])

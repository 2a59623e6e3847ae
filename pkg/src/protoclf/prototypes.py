"""Difficult and anomaly prototype selection, and prototype pseudo-labels.

Difficult prototypes represent a class's hardest members: picks ascend by
confidence, preferring high proximity and low similarity to what was already
picked. Anomaly prototypes represent the scattered minority: the first pick
has minimal proximity, later picks minimize average similarity to everything
selected so far (difficult picks included). All argmins break remaining ties
by ascending sample id, so selection is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from protoclf.data import Dataset
from protoclf.metrics import ClassMetrics, compute_class_metrics


def logsparse_budget(class_size: int) -> int:
    """Number of prototypes per class per kind: max(1, floor(log2(size)))."""
    if class_size < 1:
        raise ValueError("class_size must be >= 1")
    return max(1, int(np.floor(np.log2(class_size))))


@dataclass
class PrototypeSet:
    """Per class: ordered difficult and anomaly prototype id lists + trace."""

    difficult: dict[int, list[int]] = field(default_factory=dict)
    anomaly: dict[int, list[int]] = field(default_factory=dict)
    trace: dict[int, list[dict]] = field(default_factory=dict)

    def classes(self) -> list[int]:
        return sorted(self.difficult)

    def to_json(self) -> str:
        obj = {
            str(c): {
                "difficult": [int(i) for i in self.difficult[c]],
                "anomaly": [int(i) for i in self.anomaly.get(c, [])],
                "trace": self.trace.get(c, []),
            }
            for c in self.classes()
        }
        return json.dumps(obj, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PrototypeSet":
        obj = json.loads(text)
        ps = cls()
        for key, rec in obj.items():
            c = int(key)
            ps.difficult[c] = [int(i) for i in rec["difficult"]]
            ps.anomaly[c] = [int(i) for i in rec.get("anomaly", [])]
            ps.trace[c] = rec.get("trace", [])
        return ps

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PrototypeSet":
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"missing file: {p}")
        return cls.from_json(p.read_text())


def _trace_entry(kind: str, sample_id: int, conf: float, prox: int, avg_sim) -> dict:
    return {
        "kind": kind,
        "id": int(sample_id),
        "confidence": float(conf),
        "proximity": int(prox),
        "avg_similarity": None if avg_sim is None else float(avg_sim),
    }


def select_difficult(
    dataset: Dataset, class_index: int, metrics: ClassMetrics, budget: int
) -> tuple[list[int], list[dict]]:
    """Ordered difficult prototype ids for one class.

    First pick: lowest confidence, then highest proximity, then lowest id.
    Later picks: lowest confidence, then lowest average similarity to the
    already-picked prototypes, then highest proximity, then lowest id.
    """
    ids = metrics.indices
    m = len(ids)
    if m == 0:
        raise ValueError(f"class {class_index} is empty")
    conf, prox, S = metrics.confidence, metrics.proximity, metrics.matrix.values
    picked: list[int] = []
    trace: list[dict] = []
    remaining = list(range(m))

    first = min(remaining, key=lambda j: (conf[j], -prox[j], ids[j]))
    picked.append(first)
    remaining.remove(first)
    trace.append(_trace_entry("difficult", ids[first], conf[first], prox[first], None))

    while len(picked) < min(budget, m) and remaining:
        pick = min(
            remaining,
            key=lambda j: (conf[j], S[j, picked].mean(), -prox[j], ids[j]),
        )
        trace.append(
            _trace_entry("difficult", ids[pick], conf[pick], prox[pick], S[pick, picked].mean())
        )
        picked.append(pick)
        remaining.remove(pick)
    return [int(ids[j]) for j in picked], trace


def select_anomaly(
    dataset: Dataset,
    class_index: int,
    metrics: ClassMetrics,
    already: list[int],
    budget: int,
) -> tuple[list[int], list[dict]]:
    """Ordered anomaly prototype ids for one class.

    `already` holds the class's difficult prototypes; they are excluded from
    candidacy but included in the running average that later picks minimize.
    First pick: lowest proximity, then lowest confidence, then lowest id.
    """
    ids = metrics.indices
    pos_of = {int(i): j for j, i in enumerate(ids)}
    conf, prox, S = metrics.confidence, metrics.proximity, metrics.matrix.values
    excluded = {int(i) for i in already}
    remaining = [j for j in range(len(ids)) if int(ids[j]) not in excluded]
    trace: list[dict] = []
    if not remaining:
        trace.append({"kind": "anomaly", "flag": "empty-pool"})
        return [], trace

    first = min(remaining, key=lambda j: (prox[j], conf[j], ids[j]))
    picked = [first]
    remaining.remove(first)
    trace.append(_trace_entry("anomaly", ids[first], conf[first], prox[first], None))

    # later picks minimize average similarity to every selected prototype of
    # the class: the difficult ones plus anomaly picks so far
    selected_pos = [pos_of[i] for i in already if i in pos_of] + [first]
    while len(picked) < budget and remaining:
        pick = min(remaining, key=lambda j: (S[j, selected_pos].mean(), ids[j]))
        trace.append(
            _trace_entry(
                "anomaly", ids[pick], conf[pick], prox[pick], S[pick, selected_pos].mean()
            )
        )
        picked.append(pick)
        selected_pos.append(pick)
        remaining.remove(pick)
    return [int(ids[j]) for j in picked], trace


def select_prototypes(
    dataset: Dataset,
    s_c_percentile: float = 20.0,
    budget_override: int | None = None,
    members_per_class: dict[int, np.ndarray] | None = None,
    confidence_scaling: str = "softmax",
) -> PrototypeSet:
    """Run difficult + anomaly selection for every class."""
    ps = PrototypeSet()
    for c in range(dataset.classes):
        members = None if members_per_class is None else members_per_class[c]
        metrics = compute_class_metrics(
            dataset, c, s_c_percentile, members, confidence_scaling
        )
        size = len(metrics.indices)
        budget = budget_override if budget_override is not None else logsparse_budget(size)
        difficult, trace_d = select_difficult(dataset, c, metrics, budget)
        anomaly, trace_a = select_anomaly(dataset, c, metrics, difficult, budget)
        ps.difficult[c] = difficult
        ps.anomaly[c] = anomaly
        ps.trace[c] = trace_d + trace_a
    return ps


def _normalized(dataset: Dataset) -> np.ndarray:
    X = dataset.embeddings.astype(np.float64)
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def prototype_similarity(dataset: Dataset, sample: int, id_list: list[int]) -> float:
    """Mean cosine similarity between one sample and a prototype id list."""
    if not id_list:
        raise ValueError("empty prototype list")
    Xn = _normalized(dataset)
    sims = np.clip(Xn[list(id_list)] @ Xn[sample], -1.0, 1.0)
    return float(sims.mean())


def mean_similarity_scores(dataset: Dataset, id_lists: dict[int, list[int]]) -> np.ndarray:
    """(n, classes) matrix of mean cosine similarity to each class's id list.

    Classes with an empty list get -inf so they never win an argmax.
    """
    Xn = _normalized(dataset)
    scores = np.full((dataset.n, dataset.classes), -np.inf)
    for c in range(dataset.classes):
        lst = id_lists.get(c, [])
        if lst:
            sims = np.clip(Xn @ Xn[list(lst)].T, -1.0, 1.0)
            scores[:, c] = sims.mean(axis=1)
    return scores


def _pool_ids(sets: PrototypeSet, kind: str) -> dict[int, list[int]]:
    if kind == "difficult":
        return sets.difficult
    if kind == "anomaly":
        return sets.anomaly
    if kind == "union":
        return {
            c: list(sets.difficult.get(c, [])) + list(sets.anomaly.get(c, []))
            for c in sets.classes()
        }
    raise ValueError(f"unknown prototype kind {kind!r}")


def pseudo_label(dataset: Dataset, sample: int, sets: PrototypeSet, kind: str) -> int:
    """Class with maximal mean similarity to its `kind` prototype list.

    Classes whose list is empty are skipped; ties go to the lowest class
    index. Raises if every class's list is empty.
    """
    pools = _pool_ids(sets, kind)
    if all(len(v) == 0 for v in pools.values()):
        raise ValueError(f"no {kind} prototypes in any class")
    scores = mean_similarity_scores(dataset, pools)[sample]
    return int(np.argmax(scores))


def pseudo_labels_all(dataset: Dataset, sets: PrototypeSet, kind: str) -> np.ndarray:
    """Vectorized pseudo_label for every sample (ties to lowest class)."""
    pools = _pool_ids(sets, kind)
    if all(len(v) == 0 for v in pools.values()):
        raise ValueError(f"no {kind} prototypes in any class")
    scores = mean_similarity_scores(dataset, pools)
    return scores.argmax(axis=1).astype(np.int64)

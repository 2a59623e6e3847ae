"""Synthetic planted benchmarks and evaluation metrics.

The generator plants one isotropic Gaussian cluster per class (pairwise
centroid distance is exact) plus a fraction of far-shell anomaly members
per class, then flips each label symmetrically with probability
`noise_rate`. Anomaly directions are dispersed around a per-class axis that
combines the shared negative diagonal (anti-similar to every cluster, which
gives anomalies unambiguously minimal proximity) with a class-specific
component orthogonal to all clusters (so a linear head can still tell the
shells apart). Anomaly radii sit far beyond the required 3x centroid
distance: at `anomaly_radius_scale` times that bound, mislabeled anomalies
carry enough gradient leverage to visibly damage plain noisy-label training,
which is the regime the self-learning objective is meant to fix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from protoclf.data import Dataset
from protoclf.prototypes import select_prototypes
from protoclf.training import (
    ConfigError,
    TrainConfig,
    adjust_labels,
    preliminary_train,
    train,
)

_GEN_TAG = 0x6E2
_SPLIT_TAG = 0x51F


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the planted synthetic dataset."""

    n_per_class: int = 200
    dim: int = 16
    classes: int = 3
    cluster_sigma: float = 1.0
    centroid_distance: float = 6.0  # pairwise centroid separation, units of sigma
    anomaly_frac: float = 0.1
    noise_rate: float = 0.3
    seed: int = 0
    anomaly_mix: float = 0.8         # weight of the shared negative diagonal in anomaly axes
    anomaly_dispersion: float = 1.2  # spread of anomaly directions around their axis
    anomaly_radius_scale: float = 4.5  # multiple of the minimum far-shell radius

    def __post_init__(self) -> None:
        if self.n_per_class < 1 or self.dim < 1 or self.classes < 2:
            raise ConfigError("need n_per_class >= 1, dim >= 1, classes >= 2")
        if self.dim < self.classes:
            raise ConfigError("dim must be >= classes for the orthogonal cluster layout")
        if not 0.0 <= self.anomaly_frac < 1.0:
            raise ConfigError("anomaly_frac must be in [0, 1)")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigError("noise_rate must be in [0, 1)")
        if self.centroid_distance <= 0 or self.cluster_sigma <= 0:
            raise ConfigError("centroid_distance and cluster_sigma must be positive")
        if not 0.0 <= self.anomaly_mix <= 1.0:
            raise ConfigError("anomaly_mix must be in [0, 1]")
        if self.anomaly_dispersion < 0 or self.anomaly_radius_scale < 1.0:
            raise ConfigError("anomaly_dispersion >= 0 and anomaly_radius_scale >= 1 required")


def _centroids(spec: SynthSpec) -> np.ndarray:
    # one axis per class, scaled so pairwise distances are exact
    scale = spec.centroid_distance * spec.cluster_sigma / np.sqrt(2.0)
    cent = np.zeros((spec.classes, spec.dim))
    for c in range(spec.classes):
        cent[c, c] = scale
    return cent


def _anomaly_axes(spec: SynthSpec) -> np.ndarray:
    """Unit axis per class: negative diagonal mixed with an orthogonal direction."""
    m_hat = np.zeros(spec.dim)
    m_hat[: spec.classes] = 1.0 / np.sqrt(spec.classes)
    axes = np.zeros((spec.classes, spec.dim))
    spare = spec.dim - spec.classes
    ortho_w = np.sqrt(max(0.0, 1.0 - spec.anomaly_mix**2))
    for c in range(spec.classes):
        axis = -spec.anomaly_mix * m_hat
        if spare > 0:
            axis = axis.copy()
            axis[spec.classes + (c % spare)] += ortho_w
        n = np.linalg.norm(axis)
        axes[c] = axis / n if n > 0 else axis
    return axes


def anomaly_count(spec: SynthSpec) -> int:
    return int(round(spec.anomaly_frac * spec.n_per_class))


def planted_anomaly_ids(spec: SynthSpec) -> np.ndarray:
    """Row ids of the planted anomalies (the tail of each class block)."""
    n_anom = anomaly_count(spec)
    ids = []
    for c in range(spec.classes):
        base = c * spec.n_per_class
        ids.extend(range(base + spec.n_per_class - n_anom, base + spec.n_per_class))
    return np.asarray(ids, dtype=np.int64)


def min_anomaly_distance(spec: SynthSpec) -> float:
    """Lower bound every anomaly keeps from every centroid (>= 3x separation)."""
    return 3.0 * spec.centroid_distance * spec.cluster_sigma


def generate(spec: SynthSpec) -> Dataset:
    """Sample the planted dataset; deterministic per spec.seed.

    Layout: class blocks are contiguous; within a block the cluster members
    come first and the anomalies last, so planted_anomaly_ids(spec) recovers
    the ground-truth anomaly set without extra metadata.
    """
    rng = np.random.default_rng([spec.seed, _GEN_TAG])
    cent = _centroids(spec)
    axes = _anomaly_axes(spec)
    n_anom = anomaly_count(spec)
    n_clus = spec.n_per_class - n_anom
    d_abs = spec.centroid_distance * spec.cluster_sigma
    r_min = spec.anomaly_radius_scale * (3.0 * d_abs + float(np.linalg.norm(cent[0])))

    blocks = []
    clean = []
    for c in range(spec.classes):
        pts = cent[c] + spec.cluster_sigma * rng.standard_normal((n_clus, spec.dim))
        blocks.append(pts)
        if n_anom:
            g = rng.standard_normal((n_anom, spec.dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            dirs = axes[c] + spec.anomaly_dispersion * g
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            radii = r_min * (1.0 + 0.5 * rng.random(n_anom))
            blocks.append(dirs * radii[:, None])
        clean.extend([c] * spec.n_per_class)
    X = np.vstack(blocks)
    clean = np.asarray(clean, dtype=np.int64)

    noisy = clean.copy()
    flips = rng.random(len(clean)) < spec.noise_rate
    if spec.classes > 1:
        offsets = rng.integers(1, spec.classes, size=len(clean))
        noisy = np.where(flips, (clean + offsets) % spec.classes, clean)

    ds = Dataset(
        embeddings=np.ascontiguousarray(X, dtype=np.float32),
        noisy_labels=noisy,
        class_names=tuple(f"class_{c}" for c in range(spec.classes)),
        clean_labels=clean,
    )
    ds.validate()
    return ds


@dataclass
class MetricsReport:
    """Classification quality summary (accuracy, macro-F1, macro-recall)."""

    accuracy: float
    macro_f1: float
    macro_recall: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    confusion: list[list[int]]
    label_adjustment_accuracy: float | None = None

    def to_json(self) -> str:
        obj = {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "macro_recall": self.macro_recall,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": self.confusion,
        }
        if self.label_adjustment_accuracy is not None:
            obj["label_adjustment_accuracy"] = self.label_adjustment_accuracy
        return json.dumps(obj, sort_keys=True, indent=1)


def evaluate(preds: np.ndarray, truth: np.ndarray, classes: int | None = None) -> MetricsReport:
    """Accuracy, per-class precision/recall/F1 and their macro means.

    Zero-support or zero-prediction classes contribute 0 to the relevant
    entries rather than NaN.
    """
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if len(preds) != len(truth):
        raise ValueError(f"length mismatch: {len(preds)} preds vs {len(truth)} truth")
    if len(preds) == 0:
        raise ValueError("empty input")
    if classes is None:
        classes = int(max(preds.max(), truth.max())) + 1
    conf = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(conf, (truth, preds), 1)
    tp = np.diag(conf).astype(np.float64)
    support = conf.sum(axis=1).astype(np.float64)
    predicted = conf.sum(axis=0).astype(np.float64)
    recall = np.divide(tp, support, out=np.zeros(classes), where=support > 0)
    precision = np.divide(tp, predicted, out=np.zeros(classes), where=predicted > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(classes), where=pr > 0)
    return MetricsReport(
        accuracy=float((preds == truth).mean()),
        macro_f1=float(f1.mean()),
        macro_recall=float(recall.mean()),
        precision=[float(v) for v in precision],
        recall=[float(v) for v in recall],
        f1=[float(v) for v in f1],
        confusion=[[int(v) for v in row] for row in conf],
    )


def split_indices(
    labels: np.ndarray, seed: int, fractions: tuple[float, float] = (0.8, 0.1)
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified train/val/test split (default 80/10/10), deterministic per seed."""
    rng = np.random.default_rng([seed, _SPLIT_TAG])
    train, val, test = [], [], []
    for c in np.unique(labels):
        ids = np.where(labels == c)[0]
        ids = ids[rng.permutation(len(ids))]
        n_tr = int(round(fractions[0] * len(ids)))
        n_va = int(round(fractions[1] * len(ids)))
        train.extend(ids[:n_tr])
        val.extend(ids[n_tr : n_tr + n_va])
        test.extend(ids[n_tr + n_va :])
    return (np.sort(np.asarray(train, dtype=np.int64)),
            np.sort(np.asarray(val, dtype=np.int64)),
            np.sort(np.asarray(test, dtype=np.int64)))


def default_grid(sweep_step: float = 0.1) -> list[tuple[float, float, bool]]:
    """Flagship cells plus the adjust-off weight-factor sweep (alpha+beta < 1)."""
    cells: list[tuple[float, float, bool]] = [(0.0, 0.0, False), (0.2, 0.3, True)]
    steps = int(round(1.0 / sweep_step))
    for ai in range(steps):
        for bi in range(steps):
            alpha, beta = ai * sweep_step, bi * sweep_step
            if alpha + beta < 1.0 - 1e-9 and (alpha, beta) != (0.0, 0.0):
                cells.append((round(alpha, 3), round(beta, 3), False))
    return cells


@dataclass
class ExperimentResult:
    rows: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        cols = ["alpha", "beta", "adjust", "seed", "split",
                "accuracy", "macro_f1", "macro_recall", "adj_label_acc"]
        lines = [",".join(cols)]
        for row in self.rows:
            vals = []
            for col in cols:
                v = row[col]
                if isinstance(v, bool):
                    vals.append("true" if v else "false")
                elif isinstance(v, float):
                    vals.append(repr(float(v)))
                elif v is None:
                    vals.append("")
                else:
                    vals.append(str(v))
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    def sweep_surface(self, split: str = "test") -> str:
        """Pivot of mean accuracy over the adjust-off weight sweep:
        rows are alpha, columns beta; cells empty where alpha+beta >= 1."""
        cells = sorted(
            {(r["alpha"], r["beta"]) for r in self.rows if not r["adjust"] and r["split"] == split}
        )
        if not cells:
            return ""
        alphas = sorted({a for a, _ in cells})
        betas = sorted({b for _, b in cells})
        lines = ["alpha\\beta," + ",".join(repr(float(b)) for b in betas)]
        for a in alphas:
            row = [repr(float(a))]
            for b in betas:
                if (a, b) in cells:
                    row.append(repr(self.mean_accuracy(a, b, False, split)))
                else:
                    row.append("")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def mean_accuracy(self, alpha: float, beta: float, adjust: bool, split: str = "test") -> float:
        vals = [
            r["accuracy"]
            for r in self.rows
            if r["split"] == split and r["adjust"] == adjust
            and abs(r["alpha"] - alpha) < 1e-9 and abs(r["beta"] - beta) < 1e-9
        ]
        if not vals:
            raise KeyError(f"no rows for cell ({alpha}, {beta}, adjust={adjust}, {split})")
        return float(np.mean(vals))


def run_seed_pipeline(
    spec: SynthSpec,
    cfg: TrainConfig,
    seed: int,
    protos_per_class: int | None = None,
    anomaly_label_pool: str = "union",
):
    """Generate, split, preliminary-fit, select and adjust for one seed.

    Returns everything the per-cell training step needs; cells reuse this so
    a grid over (alpha, beta, adjust) shares the expensive stages.
    """
    ds = generate(replace(spec, seed=seed))
    strat = ds.clean_labels if ds.clean_labels is not None else ds.noisy_labels
    tr, va, te = split_indices(strat, seed)
    cfg_seeded = replace_cfg(cfg, seed=seed)
    logits = preliminary_train(ds, cfg_seeded, members=tr)
    ds = ds.with_logits(logits)
    members = {c: tr[ds.noisy_labels[tr] == c] for c in range(ds.classes)}
    protos = select_prototypes(
        ds,
        s_c_percentile=cfg.s_c_percentile,
        budget_override=protos_per_class,
        members_per_class=members,
    )
    adjusted = adjust_labels(ds, protos)
    return ds, tr, va, te, protos, adjusted, cfg_seeded


def replace_cfg(cfg: TrainConfig, **kw) -> TrainConfig:
    return replace(cfg, **kw)


def run_experiment(
    spec: SynthSpec,
    grid: list[tuple[float, float, bool]],
    cfg: TrainConfig,
    seeds: list[int],
    protos_per_class: int | None = None,
    anomaly_label_pool: str = "union",
) -> ExperimentResult:
    """Train and evaluate every (alpha, beta, adjust) cell for every seed.

    Per seed, generation, the preliminary fit, prototype selection and label
    adjustment run once and are shared across cells; evaluation is against
    clean labels on the held-out val and test splits.
    """
    result = ExperimentResult()
    for seed in seeds:
        ds, tr, va, te, protos, adjusted, cfg_seeded = run_seed_pipeline(
            spec, cfg, seed, protos_per_class, anomaly_label_pool
        )
        truth = ds.clean_labels if ds.clean_labels is not None else ds.noisy_labels
        adj_acc = float((adjusted.adjusted[tr] == truth[tr]).mean())
        for alpha, beta, adjust in grid:
            cell_cfg = replace_cfg(cfg_seeded, alpha=alpha, beta=beta, adjust_labels=adjust)
            head, _ = train(
                ds, protos, cell_cfg,
                members=tr, anomaly_label_pool=anomaly_label_pool, adjusted=adjusted,
            )
            for split_name, idx in (("val", va), ("test", te)):
                preds = head.logits(ds.embeddings[idx].astype(np.float64)).argmax(axis=1)
                rep = evaluate(preds, truth[idx], classes=ds.classes)
                result.rows.append(
                    {
                        "alpha": alpha,
                        "beta": beta,
                        "adjust": adjust,
                        "seed": seed,
                        "split": split_name,
                        "accuracy": rep.accuracy,
                        "macro_f1": rep.macro_f1,
                        "macro_recall": rep.macro_recall,
                        "adj_label_acc": adj_acc if adjust else None,
                    }
                )
    return result

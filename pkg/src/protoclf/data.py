"""Dataset interchange format and in-memory model.

A dataset directory holds:
  meta.json       {"n": int, "dim": int, "classes": int, "has_logits": bool,
                   "has_clean_labels": bool, "class_names": [str]}
  embeddings.bin  n*dim float32, little-endian, row-major (sample-major)
  logits.bin      n*classes float32, same encoding (only if has_logits)
  labels.json     {"noisy": [int]*n, "clean": [int]*n (optional)}

Embeddings are inputs produced elsewhere (an encoder, or the synthetic
generator); nothing in this package computes them. Zero-norm rows are
rejected at load time because every similarity downstream divides by the
row norm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


class DatasetFormatError(ValueError):
    """Raised when a dataset directory or its contents are malformed."""


@dataclass(frozen=True)
class Dataset:
    """Immutable container for embeddings plus labels (and optional logits)."""

    embeddings: np.ndarray          # (n, dim) float32
    noisy_labels: np.ndarray        # (n,) int64 in [0, classes)
    class_names: tuple[str, ...]
    logits: np.ndarray | None = None        # (n, classes) float32
    clean_labels: np.ndarray | None = None  # (n,) int64

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def classes(self) -> int:
        return len(self.class_names)

    def validate(self) -> None:
        if self.n < 1:
            raise DatasetFormatError("empty dataset (n must be >= 1)")
        if self.dim < 1:
            raise DatasetFormatError("dim must be >= 1")
        if self.classes < 2:
            raise DatasetFormatError("classes must be >= 2")
        if not np.all(np.isfinite(self.embeddings)):
            raise DatasetFormatError("embeddings contain non-finite values")
        norms = np.linalg.norm(self.embeddings.astype(np.float64), axis=1)
        bad = np.where(norms == 0.0)[0]
        if bad.size:
            raise DatasetFormatError(f"zero-norm embedding rows: {bad[:8].tolist()}")
        self._check_labels(self.noisy_labels, "noisy")
        if self.clean_labels is not None:
            self._check_labels(self.clean_labels, "clean")
        if self.logits is not None:
            if self.logits.shape != (self.n, self.classes):
                raise DatasetFormatError(
                    f"logits shape {self.logits.shape} != ({self.n}, {self.classes})"
                )
            if not np.all(np.isfinite(self.logits)):
                raise DatasetFormatError("logits contain non-finite values")

    def _check_labels(self, labels: np.ndarray, kind: str) -> None:
        if labels.shape != (self.n,):
            raise DatasetFormatError(f"{kind} labels length {labels.shape} != n={self.n}")
        if labels.min(initial=0) < 0 or labels.max(initial=0) >= self.classes:
            raise DatasetFormatError(f"{kind} label out of range [0, {self.classes})")

    def with_logits(self, logits: np.ndarray) -> "Dataset":
        ds = replace(self, logits=np.asarray(logits, dtype=np.float32))
        ds.validate()
        return ds


def _make_dataset(embeddings, noisy, class_names, logits=None, clean=None) -> Dataset:
    ds = Dataset(
        embeddings=np.ascontiguousarray(embeddings, dtype=np.float32),
        noisy_labels=np.asarray(noisy, dtype=np.int64),
        class_names=tuple(str(s) for s in class_names),
        logits=None if logits is None else np.ascontiguousarray(logits, dtype=np.float32),
        clean_labels=None if clean is None else np.asarray(clean, dtype=np.int64),
    )
    ds.validate()
    return ds


def _read_blob(path: Path, rows: int, cols: int, what: str) -> np.ndarray:
    raw = path.read_bytes()
    expect = rows * cols * 4
    if len(raw) != expect:
        raise DatasetFormatError(
            f"size mismatch in {what}: {len(raw)} bytes != expected {expect} ({rows}x{cols}x4)"
        )
    arr = np.frombuffer(raw, dtype="<f4").reshape(rows, cols)
    return arr


def load_dataset(path: str | Path) -> Dataset:
    """Load and fully validate a dataset directory."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"missing file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise DatasetFormatError(f"meta.json is not valid JSON: {e}") from e
    if not isinstance(meta, dict):
        raise DatasetFormatError("meta.json must hold a JSON object")
    for key in ("n", "dim", "classes", "has_logits", "has_clean_labels", "class_names"):
        if key not in meta:
            raise DatasetFormatError(f"meta.json missing field {key!r}")
    try:
        n, dim, classes = int(meta["n"]), int(meta["dim"]), int(meta["classes"])
        if len(meta["class_names"]) != classes:
            raise DatasetFormatError("class_names length != classes")
        if n < 0 or dim < 0 or classes < 0:
            raise DatasetFormatError("meta counts must be non-negative")
    except (TypeError, ValueError) as e:
        if isinstance(e, DatasetFormatError):
            raise
        raise DatasetFormatError(f"meta.json fields malformed: {e}") from e

    emb_path = root / "embeddings.bin"
    if not emb_path.is_file():
        raise FileNotFoundError(f"missing file: {emb_path}")
    embeddings = _read_blob(emb_path, n, dim, "embeddings.bin")

    logits = None
    if meta["has_logits"]:
        logits_path = root / "logits.bin"
        if not logits_path.is_file():
            raise FileNotFoundError(f"missing file: {logits_path}")
        logits = _read_blob(logits_path, n, classes, "logits.bin")

    labels_path = root / "labels.json"
    if not labels_path.is_file():
        raise FileNotFoundError(f"missing file: {labels_path}")
    try:
        labels = json.loads(labels_path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise DatasetFormatError(f"labels.json is not valid JSON: {e}") from e
    if not isinstance(labels, dict):
        raise DatasetFormatError("labels.json must hold a JSON object")
    if not isinstance(labels.get("noisy"), list) or len(labels["noisy"]) != n:
        raise DatasetFormatError("labels.json: noisy array missing or wrong length")
    clean = labels.get("clean")
    if meta["has_clean_labels"] and clean is None:
        raise DatasetFormatError("meta has_clean_labels=true but labels.json has no clean array")
    if clean is not None and (not isinstance(clean, list) or len(clean) != n):
        raise DatasetFormatError("labels.json: clean array missing or wrong length")

    try:
        return _make_dataset(embeddings, labels["noisy"], meta["class_names"], logits, clean)
    except (TypeError, ValueError) as e:
        if isinstance(e, DatasetFormatError):
            raise
        raise DatasetFormatError(f"dataset contents malformed: {e}") from e


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset directory; load_dataset inverts this bit-exactly."""
    dataset.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "n": dataset.n,
        "dim": dataset.dim,
        "classes": dataset.classes,
        "has_logits": dataset.logits is not None,
        "has_clean_labels": dataset.clean_labels is not None,
        "class_names": list(dataset.class_names),
    }
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    (root / "embeddings.bin").write_bytes(
        np.ascontiguousarray(dataset.embeddings, dtype="<f4").tobytes()
    )
    if dataset.logits is not None:
        (root / "logits.bin").write_bytes(
            np.ascontiguousarray(dataset.logits, dtype="<f4").tobytes()
        )
    else:
        # stale blob from a previous save would disagree with meta
        stale = root / "logits.bin"
        if stale.exists():
            stale.unlink()
    labels = {"noisy": dataset.noisy_labels.tolist()}
    if dataset.clean_labels is not None:
        labels["clean"] = dataset.clean_labels.tolist()
    (root / "labels.json").write_text(json.dumps(labels, sort_keys=True) + "\n")


def subsample(dataset: Dataset, q: int, seed: int) -> dict[int, np.ndarray]:
    """Per class, draw min(q, class size) indices uniformly without replacement.

    Classes are keyed by noisy label. Deterministic for a fixed seed; the
    returned indices are sorted ascending within each class.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    rng = np.random.default_rng([seed, 0x5AB5])
    out: dict[int, np.ndarray] = {}
    for c in range(dataset.classes):
        ids = np.where(dataset.noisy_labels == c)[0]
        if len(ids) > q:
            ids = rng.choice(ids, size=q, replace=False)
        out[c] = np.sort(ids)
    return out

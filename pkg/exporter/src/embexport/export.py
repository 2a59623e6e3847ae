"""Write encoded corpora as dataset directories the core toolkit loads.

The directory format is the core's interchange contract:
meta.json + embeddings.bin (float32 little-endian, row-major) + labels.json,
plus logits.bin when a preliminary head fit is requested.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from embexport.corpus import TextCorpus


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def preliminary_logits(
    embeddings: np.ndarray, labels: list[int], classes: int, epochs: int, lr: float = 0.5
) -> np.ndarray:
    """Full-batch softmax-regression fit; returns pre-softmax logits.

    This is the exporter's own small preliminary stage, just enough to give
    downstream selection a confidence signal; the core trains its own heads.
    """
    X = embeddings.astype(np.float64)
    y = np.asarray(labels)
    n, dim = X.shape
    W = np.zeros((dim, classes))
    b = np.zeros(classes)
    onehot = np.zeros((n, classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(epochs):
        G = (_softmax(X @ W + b) - onehot) / n
        W -= lr * (X.T @ G)
        b -= lr * G.sum(axis=0)
    return (X @ W + b).astype(np.float32)


def export(
    corpus: TextCorpus,
    encoder,
    out_dir: str | Path,
    preliminary_epochs: int = 0,
) -> Path:
    """Encode the corpus and write a dataset directory; returns its path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emb = np.ascontiguousarray(encoder.encode(corpus.texts), dtype="<f4")
    if emb.shape[0] != len(corpus):
        raise RuntimeError(
            f"encoder returned {emb.shape[0]} rows for {len(corpus)} texts"
        )
    if not np.all(np.isfinite(emb)):
        raise RuntimeError("encoder produced non-finite embeddings")
    norms = np.linalg.norm(emb.astype(np.float64), axis=1)
    if (norms == 0.0).any():
        raise RuntimeError("encoder produced zero-norm embeddings")

    n, dim = emb.shape
    classes = len(corpus.class_names)
    logits = None
    if preliminary_epochs > 0:
        logits = preliminary_logits(emb, corpus.noisy_labels, classes, preliminary_epochs)

    meta = {
        "n": n,
        "dim": dim,
        "classes": classes,
        "has_logits": logits is not None,
        "has_clean_labels": corpus.clean_labels is not None,
        "class_names": list(corpus.class_names),
    }
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    (out / "embeddings.bin").write_bytes(emb.tobytes())
    if logits is not None:
        (out / "logits.bin").write_bytes(np.ascontiguousarray(logits, dtype="<f4").tobytes())
    labels: dict = {"noisy": [int(v) for v in corpus.noisy_labels]}
    if corpus.clean_labels is not None:
        labels["clean"] = [int(v) for v in corpus.clean_labels]
    (out / "labels.json").write_text(json.dumps(labels, sort_keys=True) + "\n")
    return out

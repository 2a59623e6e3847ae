"""Labeled text corpora: the CSV / JSONL ingestion side of the exporter.

CSV needs a header with `text` and `label` columns (`clean_label` optional);
JSONL uses the same keys per line. Labels are strings; the class index
mapping comes from the sorted set of observed labels unless an explicit
class list is given.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path


class CorpusError(ValueError):
    """Raised when an input corpus file is malformed."""


@dataclass
class TextCorpus:
    texts: list[str]
    noisy_labels: list[int]
    class_names: list[str]
    clean_labels: list[int] | None = None

    def __post_init__(self) -> None:
        if not self.texts:
            raise CorpusError("empty corpus")
        if len(self.noisy_labels) != len(self.texts):
            raise CorpusError("labels length != texts length")
        if self.clean_labels is not None and len(self.clean_labels) != len(self.texts):
            raise CorpusError("clean labels length != texts length")
        top = len(self.class_names)
        for lab in self.noisy_labels + (self.clean_labels or []):
            if not 0 <= lab < top:
                raise CorpusError(f"label index {lab} out of range [0, {top})")

    def __len__(self) -> int:
        return len(self.texts)


def _build(records: list[dict], class_names: list[str] | None, where: str) -> TextCorpus:
    if not records:
        raise CorpusError(f"{where}: no records")
    for i, rec in enumerate(records):
        if not rec.get("text"):
            raise CorpusError(f"{where}: record {i} has no text")
        if rec.get("label") in (None, ""):
            raise CorpusError(f"{where}: record {i} has no label")
    labels = [str(r["label"]) for r in records]
    cleans = [str(r["clean_label"]) for r in records if r.get("clean_label") not in (None, "")]
    if class_names is None:
        class_names = sorted(set(labels) | set(cleans))
    index = {name: i for i, name in enumerate(class_names)}
    unknown = sorted({lab for lab in labels + cleans if lab not in index})
    if unknown:
        raise CorpusError(
            f"{where}: unknown label(s) {unknown}; valid class names: {class_names}"
        )
    has_clean = any(r.get("clean_label") not in (None, "") for r in records)
    clean_idx = None
    if has_clean:
        missing = [i for i, r in enumerate(records) if r.get("clean_label") in (None, "")]
        if missing:
            raise CorpusError(f"{where}: clean_label missing on records {missing[:5]}")
        clean_idx = [index[str(r["clean_label"])] for r in records]
    return TextCorpus(
        texts=[str(r["text"]) for r in records],
        noisy_labels=[index[lab] for lab in labels],
        class_names=list(class_names),
        clean_labels=clean_idx,
    )


def ingest_csv(path: str | Path, class_names: list[str] | None = None) -> TextCorpus:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"missing file: {p}")
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "text" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise CorpusError(f"{p}: header must contain text,label columns")
        records = list(reader)
    return _build(records, class_names, str(p))


def ingest_jsonl(path: str | Path, class_names: list[str] | None = None) -> TextCorpus:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"missing file: {p}")
    records = []
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{p}:{lineno}: invalid JSON: {e}") from e
        if not isinstance(rec, dict):
            raise CorpusError(f"{p}:{lineno}: expected an object per line")
        records.append(rec)
    return _build(records, class_names, str(p))

"""Bridge real text datasets into the embedding dataset directory format."""

from embexport.corpus import CorpusError, TextCorpus, ingest_csv, ingest_jsonl
from embexport.encoders import HashingEncoder, get_encoder
from embexport.export import export

__version__ = "0.1.0"

__all__ = [
    "CorpusError",
    "HashingEncoder",
    "TextCorpus",
    "export",
    "get_encoder",
    "ingest_csv",
    "ingest_jsonl",
]

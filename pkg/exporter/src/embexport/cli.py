"""Exporter command line: labeled text in, dataset directory out."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from embexport.corpus import CorpusError, ingest_csv, ingest_jsonl
from embexport.encoders import get_encoder
from embexport.export import export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Encode a labeled text corpus into an embedding dataset directory",
    )
    parser.add_argument("--in", dest="input", required=True,
                        help="corpus file (.csv with text,label[,clean_label] or .jsonl)")
    parser.add_argument("--encoder", default="hash",
                        help="hash, hash-<dim>, or hf:<model-name> (default: hash)")
    parser.add_argument("--out", required=True, help="dataset directory to write")
    parser.add_argument("--preliminary-epochs", type=int, default=0,
                        help="fit a small softmax head for K epochs and store its logits")
    parser.add_argument("--layer", choices=("first", "last"), default="last",
                        help="which transformer hidden layer supplies the embedding")
    parser.add_argument("--hash-dim", type=int, default=256)
    parser.add_argument("--class-names", default=None,
                        help="comma-separated label vocabulary (default: observed labels)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        names = args.class_names.split(",") if args.class_names else None
        path = Path(args.input)
        if path.suffix.lower() == ".jsonl":
            corpus = ingest_jsonl(path, names)
        elif path.suffix.lower() == ".csv":
            corpus = ingest_csv(path, names)
        else:
            raise CorpusError(f"unsupported corpus format: {path.suffix or path}")
        encoder = get_encoder(args.encoder, layer=args.layer, hash_dim=args.hash_dim)
    except (CorpusError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        out = export(corpus, encoder, args.out, preliminary_epochs=args.preliminary_epochs)
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(
        f"exported {len(corpus)} samples, {len(corpus.class_names)} classes, "
        f"encoder {encoder.name} -> {out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

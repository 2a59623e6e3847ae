"""Text encoders producing one embedding vector per document.

Two families:

* ``hash`` (default): a dependency-free hashed bag-of-ngrams projection.
  Tokens and bigrams are hashed into a fixed number of signed buckets and
  the bucket counts are L2-normalized. Fully deterministic across runs and
  platforms, works offline, and produces embeddings whose cosine similarity
  tracks lexical overlap, which is all the downstream machinery needs.

* ``hf:<model-name>``: a pretrained transformer via the ``transformers``
  package (install the ``hf`` extra). The embedding is the hidden state at
  the classification-token position, taken from the last hidden layer by
  default or the first one with ``layer="first"``. Requires the model
  weights to be available locally (or downloadable).
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _bucket(token: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return value % dim, 1.0 if (value >> 63) & 1 else -1.0


class HashingEncoder:
    """Deterministic hashed bag-of-ngrams encoder."""

    def __init__(self, dim: int = 256, ngrams: int = 2):
        if dim < 2:
            raise ValueError("encoder dim must be >= 2")
        self.dim = dim
        self.ngrams = ngrams
        self.name = f"hash-{dim}"

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = _TOKEN_RE.findall(text.lower())
            grams = list(tokens)
            for n in range(2, self.ngrams + 1):
                grams += ["_".join(tokens[j : j + n]) for j in range(len(tokens) - n + 1)]
            if not grams:
                grams = ["<empty>"]
            for g in grams:
                idx, sign = _bucket(g, self.dim)
                out[i, idx] += sign
            norm = np.linalg.norm(out[i])
            if norm == 0.0:  # all counts cancelled; fall back to a marker bucket
                idx, _ = _bucket("<cancelled>", self.dim)
                out[i, idx] = 1.0
                norm = 1.0
            out[i] /= norm
        return out.astype(np.float32)


class TransformerEncoder:
    """Pretrained transformer encoder (classification-token hidden state)."""

    def __init__(self, model_name: str, layer: str = "last", batch_size: int = 16):
        if layer not in ("first", "last"):
            raise ValueError("layer must be 'first' or 'last'")
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise RuntimeError(
                "transformer encoders need the 'hf' extra (pip install embexport[hf])"
            ) from e
        self.layer = layer
        self.batch_size = batch_size
        self.name = f"{model_name}:{layer}"
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name, output_hidden_states=True)
        self.model.eval()

    def encode(self, texts: list[str]) -> np.ndarray:
        import torch

        chunks = []
        with torch.no_grad():
            for start in range(0, len(texts), self.batch_size):
                batch = texts[start : start + self.batch_size]
                enc = self.tokenizer(
                    batch, padding=True, truncation=True, max_length=256, return_tensors="pt"
                )
                out = self.model(**enc)
                hidden = out.hidden_states[1] if self.layer == "first" else out.hidden_states[-1]
                chunks.append(hidden[:, 0, :].cpu().numpy())
        return np.vstack(chunks).astype(np.float32)


def get_encoder(name: str, layer: str = "last", hash_dim: int = 256):
    """Resolve an encoder spec: 'hash', 'hash-<dim>' or 'hf:<model-name>'."""
    if name == "hash":
        return HashingEncoder(dim=hash_dim)
    if name.startswith("hash-"):
        return HashingEncoder(dim=int(name.split("-", 1)[1]))
    if name.startswith("hf:"):
        return TransformerEncoder(name[3:], layer=layer)
    raise ValueError(f"unknown encoder {name!r} (expected hash, hash-<dim> or hf:<model>)")

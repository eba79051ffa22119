"""Context vectors from a small frozen embedding model.

A sequence's context vector is the mean of the embedder's token-embedding
rows over the sequence, truncated to the first d_e coordinates. Deliberately
lossy: token order never enters, and truncation discards tail dimensions.
The embedder is a separate tiny backbone, pretrained then frozen; only its
embedding table participates here.
"""

from __future__ import annotations

import numpy as np

from .backbone import BackboneModel
from .errors import ValidationError

DEFAULT_D_E = 32


def embed_sequence(embedder: BackboneModel, ids, d_e: int = DEFAULT_D_E) -> np.ndarray:
    """Mean-pooled token embedding of a sequence, shape (d_e,)."""
    if not embedder.frozen:
        raise ValidationError("embedder must be frozen")
    ids = [int(i) for i in ids]
    if not ids:
        raise ValidationError("cannot embed an empty sequence")
    for i in ids:
        if not 0 <= i < embedder.vocab_size:
            raise ValidationError(f"token id {i} out of vocabulary range")
    if not 0 < d_e <= embedder.d:
        raise ValidationError(f"d_e={d_e} outside (0, {embedder.d}]")
    pooled = embedder.weights["tok_emb"][ids].mean(axis=0)
    return pooled[:d_e].astype(np.float64).copy()


def embed_corpus(embedder: BackboneModel, sequences, d_e: int = DEFAULT_D_E) -> np.ndarray:
    """Stack context vectors for many sequences, shape (n, d_e)."""
    if len(sequences) == 0:
        raise ValidationError("empty sequence list")
    return np.stack([embed_sequence(embedder, s, d_e) for s in sequences])

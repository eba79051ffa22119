"""Synthetic question/answer generation from trained soft prompts.

Questions: contexts cycle round-robin over the seed examples (record j uses
seed j mod |seeds|); each record samples from the backbone conditioned on
the materialized prompt alone. Answers: plain continuation of the embedded
question tokens, no soft prompt and no template. Every record draws from
its own RNG stream derived by hashing (master seed, method, record index),
so the full record list is a pure function of its inputs and is insensitive
to generation order.
"""

from __future__ import annotations

import numpy as np

from . import vocab as V
from .backbone import BackboneModel, continue_tokens, sample
from .embedder import embed_sequence
from .errors import ValidationError
from .prompts import NonContextualParams, SoftSRVParams, materialize
from .records import SyntheticRecord

# Distinct stream codes per method keep provenance streams disjoint.
_METHOD_CODE = {"SS_NP": 1, "SS_MP": 2, "SS_MC": 3, "PT": 4, "PT_SR": 5}
_ANSWER_PHASE = 97

_VARIANT_TO_TAG = {"ss_np": "SS_NP", "ss_mp": "SS_MP", "ss_mc": "SS_MC"}


def record_stream(master_seed: int, method_tag: str, index: int, *extra: int) -> np.random.SeedSequence:
    """Per-record seed stream: hash of (master seed, method, index, ...)."""
    if method_tag not in _METHOD_CODE:
        raise ValidationError(f"unknown method_tag {method_tag!r}")
    return np.random.SeedSequence([int(master_seed), _METHOD_CODE[method_tag], int(index), *map(int, extra)])


def _nonempty_sample(model: BackboneModel, prefix, max_len, temperature, stream) -> list[int]:
    """Sample until EOS; retry on an immediate-EOS draw so questions stay nonempty.

    Draws keep consuming the record's own stream, so the result is still a
    pure function of the documented inputs. Greedy decoding cannot retry
    (it would loop), so it falls back to the UNK surface immediately.
    """
    rng = np.random.default_rng(stream)
    retries = 8 if temperature > 0 else 1
    for _ in range(retries):
        ids = sample(model, prefix, max_len, temperature, rng)
        if ids:
            return ids
    return [V.UNK]


def generate_questions(
    backbone: BackboneModel,
    embedder: BackboneModel | None,
    params: SoftSRVParams,
    seeds: list[list[int]],
    n_raw: int,
    temperature: float = 1.0,
    seed: int = 0,
    max_len: int = 64,
) -> list[SyntheticRecord]:
    """Sample n_raw question records, cycling contexts over the seed examples."""
    if params is None:
        raise ValidationError("missing soft-prompt parameters")
    if not seeds:
        raise ValidationError("no seed examples")
    if n_raw < 1:
        raise ValidationError("n_raw must be >= 1")
    tag = _VARIANT_TO_TAG[params.variant]
    contextual = not isinstance(params, NonContextualParams)

    contexts = [embed_sequence(embedder, s, params.d_e) if contextual else None for s in seeds]
    prompts = {}
    records = []
    for j in range(n_raw):
        si = j % len(seeds)
        if si not in prompts:
            prompts[si] = materialize(params, contexts[si])
        ids = _nonempty_sample(
            backbone, prompts[si], max_len, temperature, record_stream(seed, tag, j)
        )
        records.append(
            SyntheticRecord(
                question=backbone.vocab.decode(ids),
                seed_index=si,
                method_tag=tag,
                provenance={"master_seed": int(seed), "index": j, "temperature": temperature},
            )
        )
    return records


def generate_answers(
    backbone: BackboneModel,
    records: list[SyntheticRecord],
    temperature: float = 1.0,
    seed: int = 0,
    max_new: int = 64,
) -> list[SyntheticRecord]:
    """Attach sampled answers: direct continuation of the question tokens."""
    out = []
    for j, rec in enumerate(records):
        q_ids = backbone.vocab.encode(rec.question)
        stream = record_stream(seed, rec.method_tag, j, _ANSWER_PHASE)
        a_ids = continue_tokens(backbone, q_ids, max_new, temperature, stream)
        prov = dict(rec.provenance)
        prov["answer_seed"] = int(seed)
        prov["answer_temperature"] = temperature
        out.append(
            SyntheticRecord(
                question=rec.question,
                answer=backbone.vocab.decode(a_ids),
                seed_index=rec.seed_index,
                method_tag=rec.method_tag,
                provenance=prov,
            )
        )
    return out

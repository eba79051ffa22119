"""
Pretraining the frozen toy decoder
==================================

Builds a toy corpus, fits a word-level vocabulary, pretrains a small
decoder-only model on it, and samples a continuation. Everything later in
the package treats this model as a frozen black box.
"""

import numpy as np

from softsrv import (
    BackboneConfig,
    build_vocab,
    builtin_grammar,
    checksum,
    continue_tokens,
    generic_corpus,
    make_toy_corpus,
    pretrain_backbone,
)

# a few hundred grammar-generated word problems plus filler sentences
train_fold, test_fold = make_toy_corpus(builtin_grammar("arithmetic"), 120, seed=1)
filler = generic_corpus(60, seed=2)

texts = [ex.question for ex in train_fold] + [ex.answer for ex in train_fold] + filler
vocab = build_vocab(texts)
print(f"vocabulary: {len(vocab)} tokens")
print("sample question:", train_fold[0].question)

# pretrain with standard next-token loss; the model is frozen on return
sequences = [vocab.encode(ex.question + " " + ex.answer) for ex in train_fold]
sequences += [vocab.encode(line) for line in filler]
cfg = BackboneConfig(d=32, n_layers=2, n_heads=2, ffn_dim=64, max_seq=96)
model, trace = pretrain_backbone(sequences, vocab, cfg, steps=400, lr=1e-3, seed=3)

print(f"pretraining loss: {trace.losses[0]:.3f} -> {trace.losses[-1]:.3f}")
print("frozen:", model.frozen, "checksum:", checksum(model)[:16], "...")

# greedy continuation of a held-out question
prompt = vocab.encode(test_fold[0].question)
ids = continue_tokens(model, prompt, max_new=20, temperature=0.0, seed=4)
print("prompt:      ", test_fold[0].question)
print("continuation:", vocab.decode(ids))

"""Reconstruction training of soft-prompt parameters against a frozen LM.

Each step: embed a batch of target sequences into context vectors,
materialize the prompt per example, take the teacher-forced NLL of the
sequence (EOS appended so generation learns to stop), backprop through the
frozen body to dL/dP, chain into the variant's parameters, average over the
batch, and apply one Adam update. Only the prompt parameters move; the
backbone and embedder are frozen and their checksums must not change.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import vocab as V
from .backbone import BackboneModel, batch_loss_and_grads
from .checkpoint import read_checkpoint, write_checkpoint
from .embedder import embed_sequence
from .errors import TrainingDivergedError, ValidationError
from .optim import AdamState, LossTrace, adam_step, clip_global_norm, init_adam
from .prompts import (
    MixtureParams,
    MlpConcatParams,
    NonContextualParams,
    SoftSRVParams,
    materialize,
    param_arrays,
    param_grad,
    zeros_like_params,
)


@dataclass
class TrainConfig:
    steps: int = 2000
    lr: float = 1e-3
    batch_size: int = 8
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    grad_clip: float | None = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValidationError("steps >= 0, batch_size >= 1, lr > 0 required")


# Named presets: "paper" mirrors the large-scale recipe, "desk" is the
# laptop-sized default used throughout the test suite.
PRESETS: dict[str, dict] = {
    "paper": {"t": 128, "steps": 20000, "lr": 5e-6, "batch_size": 8},
    "desk": {"t": 16, "steps": 2000, "lr": 1e-3, "batch_size": 8},
}


def preset_train_config(name: str, seed: int = 0) -> tuple[TrainConfig, int]:
    """Returns (TrainConfig, prompt width t) for a named preset."""
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}")
    p = PRESETS[name]
    return TrainConfig(steps=p["steps"], lr=p["lr"], batch_size=p["batch_size"], seed=seed), p["t"]


def train(
    backbone: BackboneModel,
    embedder: BackboneModel | None,
    dataset: list[list[int]],
    params: SoftSRVParams,
    cfg: TrainConfig,
) -> tuple[SoftSRVParams, LossTrace]:
    """Train a copy of params; the input object is never mutated."""
    if not backbone.frozen:
        raise ValidationError("backbone must be frozen")
    contextual = not isinstance(params, NonContextualParams)
    if contextual:
        if embedder is None:
            raise ValidationError(f"variant {params.variant} requires an embedder")
        if embedder is backbone:
            raise ValidationError("embedder must be distinct from the backbone")
        if not embedder.frozen:
            raise ValidationError("embedder must be frozen")
    if not dataset:
        raise ValidationError("empty dataset")
    if params.d != backbone.d:
        raise ValidationError(f"params.d={params.d} does not match backbone d={backbone.d}")
    if not 0 < params.t < backbone.config.max_seq:
        raise ValidationError(f"prompt width t={params.t} exceeds backbone capacity")

    targets = []
    for ids in dataset:
        ids = [int(i) for i in ids]
        if not ids:
            raise ValidationError("empty sequence in dataset")
        targets.append(ids + [V.EOS])
    contexts = (
        [embed_sequence(embedder, ids, params.d_e) for ids in dataset] if contextual else [None] * len(dataset)
    )

    work = copy.deepcopy(params)
    trace = LossTrace()
    if cfg.steps == 0:
        trace.finish()
        return work, trace

    arrays = dict(param_arrays(work))
    adam = init_adam(arrays)
    rng = np.random.default_rng(cfg.seed)
    order: list[int] = []
    for step in range(cfg.steps):
        if len(order) < cfg.batch_size:
            order += [int(i) for i in rng.permutation(len(targets))]
        batch = order[: cfg.batch_size]
        order = order[cfg.batch_size:]

        prefixes = [materialize(work, contexts[i]).T for i in batch]  # row-major core
        loss, _, prefix_grads, _ = batch_loss_and_grads(
            backbone,
            prefixes,
            [targets[i] for i in batch],
            want_prefix_grads=True,
        )
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)

        grad_acc = zeros_like_params(work)
        acc_arrays = dict(param_arrays(grad_acc))
        for bi, i in enumerate(batch):
            g = param_grad(work, contexts[i], prefix_grads[bi].T)
            for name, arr in param_arrays(g):
                acc_arrays[name] += arr / len(batch)
        if cfg.grad_clip is not None:
            clip_global_norm(acc_arrays, cfg.grad_clip)
        deltas = adam_step(adam, acc_arrays, cfg.lr, cfg.betas, cfg.eps)
        for name, delta in deltas.items():
            arrays[name] += delta
        trace.record(loss)
    trace.finish()
    return work, trace


# ---------------------------------------------------------------------------
# parameter checkpoints

def _params_meta(params: SoftSRVParams) -> dict:
    meta = {"variant": params.variant, "d": params.d, "t": params.t, "d_e": params.d_e}
    if isinstance(params, MixtureParams):
        meta["k"] = params.k
    if isinstance(params, MlpConcatParams):
        meta["layer_sizes"] = [list(w.shape) for w, _ in params.columns[0]]
    return meta


def save_params(path, params: SoftSRVParams, adam: AdamState | None = None) -> None:
    tensors = {f"param.{name}": arr for name, arr in param_arrays(params)}
    meta = _params_meta(params)
    if adam is not None:
        meta["adam_step"] = adam.step
        for name, arr in adam.m.items():
            tensors[f"adam_m.{name}"] = arr
        for name, arr in adam.v.items():
            tensors[f"adam_v.{name}"] = arr
    write_checkpoint(path, "softsrv_params", meta, tensors)


def load_params(path, backbone: BackboneModel | None = None) -> tuple[SoftSRVParams, AdamState | None]:
    _, meta, tensors = read_checkpoint(path, expect_kind="softsrv_params")
    variant, d, t, d_e = meta["variant"], meta["d"], meta["t"], meta["d_e"]
    if backbone is not None:
        if d != backbone.d:
            raise ValidationError(f"checkpoint d={d} does not match backbone d={backbone.d}")
        if not 0 < t < backbone.config.max_seq:
            raise ValidationError(f"checkpoint t={t} exceeds backbone capacity")

    def par(name: str) -> np.ndarray:
        key = f"param.{name}"
        if key not in tensors:
            raise ValidationError(f"checkpoint is missing tensor {name!r}")
        return tensors[key]

    if variant == "ss_np":
        params: SoftSRVParams = NonContextualParams(d=d, t=t, d_e=d_e, prompt=par("prompt"))
    elif variant == "ss_mp":
        bases = [par(f"basis_{i}") for i in range(meta["k"])]
        params = MixtureParams(d=d, t=t, d_e=d_e, bases=bases,
                               gate_w=par("gate_w"), gate_b=par("gate_b"))
    elif variant == "ss_mc":
        n_layers = len(meta["layer_sizes"])
        columns = [
            [(par(f"col{j}_w{li}"), par(f"col{j}_b{li}")) for li in range(n_layers)]
            for j in range(t)
        ]
        params = MlpConcatParams(d=d, t=t, d_e=d_e, columns=columns)
    else:
        raise ValidationError(f"unknown variant {variant!r} in checkpoint")

    adam = None
    if "adam_step" in meta:
        names = [n for n, _ in param_arrays(params)]
        adam = AdamState(
            m={n: tensors[f"adam_m.{n}"] for n in names},
            v={n: tensors[f"adam_v.{n}"] for n in names},
            step=int(meta["adam_step"]),
        )
    return params, adam

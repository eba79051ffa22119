"""Soft-prompt parameterizations and their gradients.

Three ways to produce a (d, t) prompt matrix for the frozen backbone:

- non-contextual: the matrix itself is the parameter set; every context
  gets the same prompt.
- mixture: k basis matrices combined by softmax weights from a learned
  affine map of the context vector.
- per-column MLPs: t independent small ReLU MLPs, each mapping the context
  vector to one prompt column.

param_grad chains an upstream dL/dP into gradients over each variant's own
parameters; like the backbone, all backward math is manual and is checked
against finite differences in the tests.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .backbone import BackboneModel
from .errors import ValidationError

VARIANTS = ("ss_np", "ss_mp", "ss_mc")


@dataclass
class NonContextualParams:
    variant = "ss_np"
    d: int
    t: int
    d_e: int
    prompt: np.ndarray  # (d, t)


@dataclass
class MixtureParams:
    variant = "ss_mp"
    d: int
    t: int
    d_e: int
    bases: list[np.ndarray]  # k matrices, each (d, t)
    gate_w: np.ndarray       # (k, d_e)
    gate_b: np.ndarray       # (k,)

    @property
    def k(self) -> int:
        return len(self.bases)


@dataclass
class MlpConcatParams:
    variant = "ss_mc"
    d: int
    t: int
    d_e: int
    # columns[j] is the layer list [(W, b), ...] of the MLP emitting column j
    columns: list[list[tuple[np.ndarray, np.ndarray]]] = field(default_factory=list)


SoftSRVParams = NonContextualParams | MixtureParams | MlpConcatParams


def _check_context(params: SoftSRVParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.d_e,):
        raise ValidationError(f"context vector must have shape ({params.d_e},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValidationError("context vector contains non-finite entries")
    return z


def init_params(
    variant: str,
    backbone: BackboneModel,
    t: int,
    d_e: int,
    seed: int,
    k: int = 2,
    mlp_hidden: int = 128,
    mlp_layers: int = 3,
) -> SoftSRVParams:
    """Seeded initialization anchored to the backbone's embedding table.

    Prompt columns (and the MLPs' output biases) start as sampled rows of
    the token-embedding table, so the initial prompt looks like embedded
    text. MLP hidden layers get fan-in-scaled uniform noise with zero final
    weights, making the initial output independent of the context.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}")
    d = backbone.d
    if not 0 < t < backbone.config.max_seq:
        raise ValidationError(f"prompt width t={t} outside (0, {backbone.config.max_seq})")
    if mlp_layers < 2:
        raise ValidationError("per-column MLPs need at least two layers")
    rng = np.random.default_rng(seed)
    table = backbone.weights["tok_emb"]

    def sampled_columns() -> np.ndarray:
        rows = rng.integers(0, table.shape[0], size=t)
        return table[rows].T.astype(np.float64).copy()  # (d, t)

    if variant == "ss_np":
        return NonContextualParams(d=d, t=t, d_e=d_e, prompt=sampled_columns())

    if variant == "ss_mp":
        if k < 1:
            raise ValidationError("mixture needs k >= 1 bases")
        bases = [sampled_columns() for _ in range(k)]
        return MixtureParams(
            d=d, t=t, d_e=d_e, bases=bases,
            gate_w=np.zeros((k, d_e)), gate_b=np.zeros(k),
        )

    sizes = [d_e] + [mlp_hidden] * (mlp_layers - 1) + [d]
    columns = []
    for _ in range(t):
        layers = []
        for li in range(mlp_layers):
            fan_in = sizes[li]
            bound = 1.0 / np.sqrt(fan_in)
            if li < mlp_layers - 1:
                w = rng.uniform(-bound, bound, size=(sizes[li + 1], fan_in))
                b = np.zeros(sizes[li + 1])
            else:
                w = np.zeros((sizes[li + 1], fan_in))
                b = table[int(rng.integers(0, table.shape[0]))].astype(np.float64).copy()
            layers.append((w, b))
        columns.append(layers)
    return MlpConcatParams(d=d, t=t, d_e=d_e, columns=columns)


def mixture_weights(params: MixtureParams, z) -> np.ndarray:
    """Softmax gate output, a point on the k-simplex."""
    z = _check_context(params, z)
    logits = params.gate_w @ z + params.gate_b
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()


def _mlp_forward(layers, z) -> tuple[np.ndarray, list]:
    """Linear chain with ReLU between layers; returns output and activations."""
    h = z
    acts = []
    for li, (w, b) in enumerate(layers):
        pre = w @ h + b
        acts.append((h, pre))
        h = np.maximum(pre, 0.0) if li < len(layers) - 1 else pre
    return h, acts


def materialize(params: SoftSRVParams, z=None) -> np.ndarray:
    """Produce the (d, t) prompt matrix for a context.

    The non-contextual variant ignores z (it may be omitted); contextual
    variants require it.
    """
    if isinstance(params, NonContextualParams):
        return params.prompt.copy()
    if z is None:
        raise ValidationError(f"variant {params.variant} requires a context vector")
    z = _check_context(params, z)
    if isinstance(params, MixtureParams):
        w = mixture_weights(params, z)
        out = np.zeros((params.d, params.t))
        for wi, basis in zip(w, params.bases):
            out += wi * basis
        return out
    out = np.empty((params.d, params.t))
    for j, layers in enumerate(params.columns):
        out[:, j], _ = _mlp_forward(layers, z)
    return out


def zeros_like_params(params: SoftSRVParams) -> SoftSRVParams:
    """Same structure, all arrays zero; used as a gradient container."""
    g = copy.deepcopy(params)
    for _, arr in param_arrays(g):
        arr[...] = 0.0
    return g


def param_arrays(params: SoftSRVParams) -> list[tuple[str, np.ndarray]]:
    """Named, ordered views of every trainable array in the variant."""
    if isinstance(params, NonContextualParams):
        return [("prompt", params.prompt)]
    if isinstance(params, MixtureParams):
        out = [(f"basis_{i}", b) for i, b in enumerate(params.bases)]
        return out + [("gate_w", params.gate_w), ("gate_b", params.gate_b)]
    out = []
    for j, layers in enumerate(params.columns):
        for li, (w, b) in enumerate(layers):
            out.append((f"col{j}_w{li}", w))
            out.append((f"col{j}_b{li}", b))
    return out


def param_grad(params: SoftSRVParams, z, upstream: np.ndarray) -> SoftSRVParams:
    """Chain dL/dP (shape (d, t)) into a same-structure gradient object."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (params.d, params.t):
        raise ValidationError(
            f"upstream must have shape ({params.d}, {params.t}), got {upstream.shape}"
        )
    grads = zeros_like_params(params)

    if isinstance(params, NonContextualParams):
        grads.prompt[...] = upstream
        return grads

    z = _check_context(params, z)
    if isinstance(params, MixtureParams):
        w = mixture_weights(params, z)
        scores = np.array([float(np.sum(upstream * b)) for b in params.bases])
        glogits = w * (scores - float(np.dot(w, scores)))  # softmax Jacobian
        for i in range(params.k):
            grads.bases[i][...] = w[i] * upstream
        grads.gate_w[...] = np.outer(glogits, z)
        grads.gate_b[...] = glogits
        return grads

    for j, layers in enumerate(params.columns):
        _, acts = _mlp_forward(layers, z)
        delta = upstream[:, j]
        for li in reversed(range(len(layers))):
            w, _ = layers[li]
            h, pre = acts[li]
            if li < len(layers) - 1:
                delta = delta * (pre > 0)
            gw, gb = grads.columns[j][li]
            gw[...] = np.outer(delta, h)
            gb[...] = delta
            delta = w.T @ delta
    return grads

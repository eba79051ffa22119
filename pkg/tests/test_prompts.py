"""Prompt parameterizations: shapes, gating, contextuality."""

import numpy as np
import pytest

from softsrv.backbone import BackboneConfig, init_backbone
from softsrv.errors import ValidationError
from softsrv.prompts import (
    MixtureParams,
    MlpConcatParams,
    NonContextualParams,
    init_params,
    materialize,
    mixture_weights,
    param_arrays,
    zeros_like_params,
)
from softsrv.vocab import build_vocab


@pytest.fixture(scope="module")
def model():
    vocab = build_vocab(["one two three four five six seven eight"])
    cfg = BackboneConfig(d=8, n_layers=1, n_heads=2, ffn_dim=8, max_seq=32)
    return init_backbone(cfg, vocab, 4)


def test_variant_dispatch(model):
    assert isinstance(init_params("ss_np", model, 3, 4, 0), NonContextualParams)
    assert isinstance(init_params("ss_mp", model, 3, 4, 0), MixtureParams)
    assert isinstance(init_params("ss_mc", model, 3, 4, 0), MlpConcatParams)
    with pytest.raises(ValidationError):
        init_params("nope", model, 3, 4, 0)


def test_initial_columns_come_from_the_embedding_table(model):
    params = init_params("ss_np", model, t=4, d_e=4, seed=9)
    table = model.weights["tok_emb"]
    for j in range(4):
        col = params.prompt[:, j]
        assert any(np.allclose(col, row) for row in table)


def test_non_contextual_ignores_context(model):
    params = init_params("ss_np", model, t=3, d_e=4, seed=1)
    a = materialize(params)
    b = materialize(params, np.ones(4))
    np.testing.assert_array_equal(a, b)
    assert a is not params.prompt  # caller cannot mutate the stored prompt


def test_contextual_variants_require_context(model):
    for variant in ("ss_mp", "ss_mc"):
        params = init_params(variant, model, t=3, d_e=4, seed=1)
        with pytest.raises(ValidationError):
            materialize(params)


def test_mixture_weights_live_on_the_simplex(model):
    params = init_params("ss_mp", model, t=3, d_e=4, seed=2, k=5)
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = mixture_weights(params, rng.standard_normal(4) * 10)
        assert w.shape == (5,)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_mixture_prompt_is_convex_combination(model):
    params = init_params("ss_mp", model, t=3, d_e=4, seed=2, k=3)
    z = np.array([0.3, -1.2, 0.7, 0.0])
    w = mixture_weights(params, z)
    want = sum(wi * basis for wi, basis in zip(w, params.bases))
    np.testing.assert_allclose(materialize(params, z), want, rtol=1e-12)


def test_mixture_gate_starts_uniform(model):
    # gate weights start at zero, so every context mixes the bases equally
    params = init_params("ss_mp", model, t=3, d_e=4, seed=3, k=4)
    w = mixture_weights(params, np.array([5.0, -2.0, 0.1, 9.0]))
    np.testing.assert_allclose(w, np.full(4, 0.25), rtol=1e-12)


def test_mlp_columns_are_context_sensitive_after_perturbation(model):
    params = init_params("ss_mc", model, t=2, d_e=4, seed=4, mlp_hidden=6, mlp_layers=3)
    # at init the final linear layer is zero, so output equals its bias
    a = materialize(params, np.zeros(4))
    b = materialize(params, np.ones(4))
    np.testing.assert_array_equal(a, b)
    # give the final layer weight, and contexts separate
    params.columns[0][-1] = (np.ones_like(params.columns[0][-1][0]), params.columns[0][-1][1])
    assert not np.array_equal(materialize(params, np.zeros(4)), materialize(params, np.ones(4)))


def test_mlp_layer_sizing(model):
    params = init_params("ss_mc", model, t=2, d_e=4, seed=5, mlp_hidden=6, mlp_layers=3)
    assert len(params.columns) == 2
    for layers in params.columns:
        shapes = [w.shape for w, _ in layers]
        assert shapes == [(6, 4), (6, 6), (8, 6)]


def test_param_arrays_and_zeros_cover_every_parameter(model):
    for variant in ("ss_np", "ss_mp", "ss_mc"):
        params = init_params(variant, model, t=2, d_e=4, seed=6, k=3, mlp_hidden=5)
        names = [n for n, _ in param_arrays(params)]
        assert len(names) == len(set(names))
        zeros = zeros_like_params(params)
        for (na, a), (nz, z) in zip(param_arrays(params), param_arrays(zeros)):
            assert na == nz
            assert a.shape == z.shape
            assert not np.any(z)


def test_context_width_validated(model):
    params = init_params("ss_mp", model, t=2, d_e=4, seed=7)
    with pytest.raises(ValidationError):
        materialize(params, np.ones(5))

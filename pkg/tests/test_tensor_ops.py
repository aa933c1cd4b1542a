"""Substrate op contracts: spec'd examples plus oracle equivalence."""

import math

import numpy as np
import pytest

from dyadnet import nn
from dyadnet.nn import ops
from dyadnet.errors import ContractViolation, ConfigurationError, NumericsError

import oracles


def t(arr, dtype=np.float64):
    return nn.Tensor(np.asarray(arr, dtype=dtype))


# --- conv3d ---------------------------------------------------------------

def test_conv3d_single_element_product():
    x = t(np.full((1, 1, 1, 1, 1), 2.0))
    w = t(np.full((1, 1, 1, 1, 1), 3.0))
    y = ops.conv3d(x, w, t(np.zeros(1)), stride=1, padding=0)
    assert y.item() == pytest.approx(6.0)


def test_conv3d_all_ones_sums_kernel_volume():
    x = t(np.ones((1, 1, 2, 2, 2)))
    w = t(np.ones((1, 1, 2, 2, 2)))
    y = ops.conv3d(x, w, t(np.zeros(1)), stride=1, padding=0)
    assert y.shape == (1, 1, 1, 1, 1)
    assert y.item() == pytest.approx(8.0)


@pytest.mark.parametrize("seed", range(6))
def test_conv3d_matches_loop_oracle(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((1, 2, 4, 4, 4))
    w = r.standard_normal((3, 2, 2, 3, 3))
    b = r.standard_normal(3)
    stride = (1, 2, 1)
    padding = (1, 0, 1)
    got = ops.conv3d(t(x), t(w), t(b), stride, padding).data
    want = oracles.conv3d_loops(x, w, b, stride, padding)
    assert np.allclose(got, want, rtol=1e-6, atol=1e-9)


def test_conv3d_channel_mismatch_names_dimension():
    x = t(np.zeros((1, 2, 3, 3, 3)))
    w = t(np.zeros((1, 3, 3, 3, 3)))
    with pytest.raises(ContractViolation, match="channel"):
        ops.conv3d(x, w, None, 1, 1)


def test_conv3d_collapsed_extent_rejected():
    x = t(np.zeros((1, 1, 2, 2, 2)))
    w = t(np.zeros((1, 1, 3, 3, 3)))
    with pytest.raises(ContractViolation, match="extent"):
        ops.conv3d(x, w, None, 1, 0)


# --- pooling ---------------------------------------------------------------

def test_global_pool_of_constant_is_constant():
    x = t(np.full((2, 3, 2, 4, 4), 5.0))
    y = ops.avg_pool3d_global(x)
    assert np.allclose(y.data, 5.0, atol=1e-6)


def test_global_pool_arithmetic_mean():
    x = t(np.arange(8, dtype=np.float64).reshape(1, 1, 2, 2, 2))
    assert ops.avg_pool3d_global(x).item() == pytest.approx(3.5)


def test_spatial_pool_keeps_frames():
    x = np.zeros((1, 2, 2, 3, 3))
    x[:, :, 0] = 1.0
    x[:, :, 1] = 3.0
    y = ops.avg_pool2d_spatial(t(x))
    assert y.shape == (1, 2, 2)
    assert np.allclose(y.data, [[[1.0, 3.0], [1.0, 3.0]]])


def test_spatial_pool_constant():
    y = ops.avg_pool2d_spatial(t(np.full((1, 1, 3, 4, 4), 4.0)))
    assert np.allclose(y.data, 4.0, atol=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_pools_match_summation_oracle(seed, rng):
    x = np.random.default_rng(seed).standard_normal((2, 3, 3, 4, 5))
    got3 = ops.avg_pool3d_global(t(x)).data
    got2 = ops.avg_pool2d_spatial(t(x)).data
    assert np.allclose(got3, oracles.mean_pool_loops(x, spatial_only=False), atol=1e-6)
    assert np.allclose(got2, oracles.mean_pool_loops(x, spatial_only=True), atol=1e-6)


def test_pool_rejects_rank_mismatch():
    with pytest.raises(ContractViolation):
        ops.avg_pool3d_global(t(np.zeros((2, 3))))


# --- linear -----------------------------------------------------------------

def test_linear_identity_weight_is_identity():
    x = np.random.default_rng(1).standard_normal((3, 4))
    y = ops.linear(t(x), t(np.eye(4)), t(np.zeros(4)))
    assert np.allclose(y.data, x)


def test_linear_zero_weight_broadcasts_bias():
    b = np.array([1.0, -2.0])
    y = ops.linear(t(np.ones((2, 5, 3))), t(np.zeros((2, 3))), t(b))
    assert np.allclose(y.data, np.broadcast_to(b, (2, 5, 2)))


@pytest.mark.parametrize("seed", range(5))
def test_linear_matches_loop_oracle(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((2, 3, 4))
    w = r.standard_normal((5, 4))
    b = r.standard_normal(5)
    got = ops.linear(t(x), t(w), t(b)).data
    assert np.allclose(got, oracles.linear_loops(x, w, b), rtol=1e-6, atol=1e-9)


def test_linear_trailing_mismatch():
    with pytest.raises(ContractViolation, match="trailing"):
        ops.linear(t(np.zeros((2, 3))), t(np.zeros((4, 5))), t(np.zeros(4)))


# --- layer norm --------------------------------------------------------------

def test_layer_norm_unit_stats():
    y = ops.layer_norm(t([[1.0, 2.0, 3.0]]), t(np.ones(3)), t(np.zeros(3)))
    assert abs(y.data.mean()) < 1e-9
    assert y.data.var() == pytest.approx(1.0, abs=1e-4)


def test_layer_norm_constant_row_is_zeros():
    y = ops.layer_norm(t(np.full((2, 4), 7.0)), t(np.ones(4)), t(np.zeros(4)))
    assert np.allclose(y.data, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_layer_norm_row_statistics(seed):
    x = np.random.default_rng(seed).standard_normal((4, 7, 16))
    y = ops.layer_norm(t(x), t(np.ones(16)), t(np.zeros(16)), eps=1e-5).data
    assert np.abs(y.mean(axis=-1)).max() < 1e-6
    assert np.abs(y.var(axis=-1) - 1.0).max() < 1e-4


# --- activations --------------------------------------------------------------

def test_gelu_relu_at_zero():
    assert ops.gelu(t([0.0])).item() == 0.0
    assert ops.relu(t([0.0])).item() == 0.0


def test_relu_clamps():
    y = ops.relu(t([-2.0, 3.0]))
    assert y.data.tolist() == [0.0, 3.0]


def test_gelu_matches_erf_oracle():
    xs = np.array([-3.0, -1.0, 0.0, 1.0, 3.0])
    got = ops.gelu(t(xs)).data
    want = [oracles.gelu_erf(float(v)) for v in xs]
    assert np.allclose(got, want, atol=1e-6)


# --- softmax -------------------------------------------------------------------

def test_softmax_symmetry():
    assert np.allclose(ops.softmax(t([0.0, 0.0])).data, [0.5, 0.5])


def test_softmax_extreme_logits_stable():
    y = ops.softmax(t([1000.0, 0.0])).data
    assert np.all(np.isfinite(y))
    assert y[0] == pytest.approx(1.0)
    assert y[1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_softmax_matches_direct_oracle(seed):
    x = np.random.default_rng(seed).standard_normal((3, 7))
    assert np.allclose(ops.softmax(t(x)).data, oracles.softmax_direct(x), atol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_softmax_rows_normalised_property(seed):
    x = np.random.default_rng(seed).standard_normal((4, 9)) * 10
    y = ops.softmax(t(x)).data
    assert np.abs(y.sum(axis=-1) - 1.0).max() < 1e-6
    assert (y >= 0).all()


# --- attention --------------------------------------------------------------

def _identity_proj(d):
    eye = t(np.eye(d))
    zero = t(np.zeros(d))
    return dict(wq=eye, bq=zero, wk=t(np.eye(d)), bk=t(np.zeros(d)),
                wv=t(np.eye(d)), bv=t(np.zeros(d)), wo=t(np.eye(d)),
                bo=t(np.zeros(d)))


def test_attention_single_key_returns_value_row():
    d = 4
    r = np.random.default_rng(0)
    q = t(r.standard_normal((1, 3, d)))
    kv = t(r.standard_normal((1, 1, d)))
    out = ops.multi_head_attention(q, kv, kv, 1, **_identity_proj(d))
    for row in range(3):
        assert np.allclose(out.data[0, row], kv.data[0, 0], atol=1e-6)


def test_attention_orthogonal_query_uniform_mean():
    d = 4
    k = np.zeros((1, 3, d))
    k[0, :, 0] = [1.0, 2.0, -1.0]
    v = np.random.default_rng(1).standard_normal((1, 3, d))
    q = np.zeros((1, 2, d))
    q[0, :, 1] = 5.0   # orthogonal to every key row
    out = ops.multi_head_attention(t(q), t(k), t(v), 1, **_identity_proj(d))
    assert np.allclose(out.data[0, 0], v.mean(axis=1)[0], atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_attention_matches_loop_oracle(seed):
    d, heads = 8, 2
    r = np.random.default_rng(seed)
    q = r.standard_normal((2, 3, d))
    k = r.standard_normal((2, 4, d))
    v = r.standard_normal((2, 4, d))
    got = ops.multi_head_attention(t(q), t(k), t(v), heads, **_identity_proj(d)).data
    want = oracles.attention_loops(q, k, v, heads)
    assert np.allclose(got, want, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_attention_kv_permutation_invariance_property(seed):
    d, heads = 12, 3
    r = np.random.default_rng(seed)
    q = r.standard_normal((1, 4, d))
    k = r.standard_normal((1, 5, d))
    v = r.standard_normal((1, 5, d))
    proj = {name: t(r.standard_normal(p.shape))
            for name, p in _identity_proj(d).items()}
    base = ops.multi_head_attention(t(q), t(k), t(v), heads, **proj).data
    perm = r.permutation(5)
    permed = ops.multi_head_attention(t(q), t(k[:, perm]), t(v[:, perm]),
                                      heads, **proj).data
    assert np.abs(base - permed).max() < 1e-6


def test_attention_head_divisibility():
    d = 6
    r = np.random.default_rng(0)
    q = t(r.standard_normal((1, 2, d)))
    with pytest.raises(ConfigurationError, match="divisible"):
        ops.multi_head_attention(q, q, q, 4, **_identity_proj(d))


# --- cross entropy -----------------------------------------------------------

def test_cross_entropy_uniform_two_way():
    loss = ops.cross_entropy(t([[0.0, 0.0]]), np.array([0]))
    assert loss.item() == pytest.approx(math.log(2.0), abs=1e-6)


def test_cross_entropy_confident_correct():
    loss = ops.cross_entropy(t([[50.0, -50.0]]), np.array([0]))
    assert loss.item() == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_cross_entropy_matches_lse_oracle(seed):
    r = np.random.default_rng(seed)
    logits = r.standard_normal((6, 5)) * 3
    labels = r.integers(0, 5, size=6)
    got = ops.cross_entropy(t(logits), labels).item()
    assert got == pytest.approx(oracles.cross_entropy_lse(logits, labels), abs=1e-6)


def test_cross_entropy_rejects_bad_label():
    with pytest.raises(ContractViolation, match="label"):
        ops.cross_entropy(t(np.zeros((2, 3))), np.array([0, 3]))


# --- finiteness & misc ---------------------------------------------------------

def test_non_finite_output_raises_when_checking():
    with np.errstate(over="ignore"):
        with pytest.raises(NumericsError, match="non-finite"):
            ops.scale(t([1e308]), 1e308)


def test_sum_all_gradient_is_ones():
    x = t(np.random.default_rng(0).standard_normal((3, 4)))
    x.requires_grad = True
    ops.sum_all(x).backward()
    assert np.allclose(x.grad, 1.0)

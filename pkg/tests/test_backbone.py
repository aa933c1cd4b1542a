"""Backbone pyramid: shapes, weight sharing, gradient flow."""

import numpy as np
import pytest

from dyadnet import nn
from dyadnet.nn import ops
from dyadnet.errors import ConfigurationError
from dyadnet.models import Backbone, BackboneConfig


@pytest.fixture(scope="module")
def toy_backbone():
    return Backbone(BackboneConfig(), np.random.default_rng(0))


def clip(seed=0, batch=1):
    r = np.random.default_rng(seed)
    return nn.Tensor(r.random((batch, 3, 16, 32, 32), dtype=np.float32))


def test_toy_config_tap_shapes(toy_backbone):
    feats = toy_backbone(clip(batch=2))
    assert feats.g3.shape == (2, 24, 4, 8, 8)
    assert feats.g4.shape == (2, 32, 2, 4, 4)
    assert feats.g5.shape == (2, 48, 2, 4, 4)


def test_zero_clip_finite_outputs(toy_backbone):
    feats = toy_backbone(nn.Tensor(np.zeros((1, 3, 16, 32, 32), np.float32)))
    for g in (feats.g3, feats.g4, feats.g5):
        assert np.all(np.isfinite(g.data))


def test_batch_rows_independent(toy_backbone):
    one = clip(seed=3)
    two = nn.Tensor(np.concatenate([one.data, one.data], axis=0))
    feats = toy_backbone(two)
    assert np.array_equal(feats.g5.data[0], feats.g5.data[1])


def test_dual_forward_shares_weights_exactly(toy_backbone):
    a, b = clip(seed=1), clip(seed=2)
    fa, fb = toy_backbone.dual_forward(a, b)
    ra, rb = toy_backbone(a), toy_backbone(b)
    assert np.array_equal(fa.g5.data, ra.g5.data)
    assert np.array_equal(fb.g5.data, rb.g5.data)


def test_dual_forward_same_input_identical(toy_backbone):
    a = clip(seed=4)
    fa, fb = toy_backbone.dual_forward(a, nn.Tensor(a.data.copy()))
    for ga, gb in ((fa.g3, fb.g3), (fa.g4, fb.g4), (fa.g5, fb.g5)):
        assert np.array_equal(ga.data, gb.data)


def test_dual_forward_swap_swaps_outputs(toy_backbone):
    a, b = clip(seed=5), clip(seed=6)
    fa, fb = toy_backbone.dual_forward(a, b)
    gb, ga = toy_backbone.dual_forward(b, a)
    assert np.array_equal(fa.g5.data, ga.g5.data)
    assert np.array_equal(fb.g5.data, gb.g5.data)


def test_dual_forward_adds_no_parameters(toy_backbone):
    count_before = toy_backbone.count_params()
    toy_backbone.dual_forward(clip(7), clip(8))
    assert toy_backbone.count_params() == count_before
    names = [n for n, _ in toy_backbone.named_parameters()]
    assert len(names) == len(set(names))


def test_extent_mismatch_lists_expected_and_actual(toy_backbone):
    with pytest.raises(ConfigurationError, match="32"):
        toy_backbone(nn.Tensor(np.zeros((1, 3, 16, 16, 16), np.float32)))


def test_downsampling_monotonic():
    for seed in range(3):
        r = np.random.default_rng(seed)
        strides = tuple(int(s) for s in r.integers(1, 3, size=5))
        cfg = BackboneConfig(temporal_strides=strides,
                             spatial_strides=(2, 2, 1, 2, 1))
        sizes = [t * h * w for t, h, w in cfg.block_extents()]
        assert sizes[2] >= sizes[3] >= sizes[4]


def test_aggressive_striding_keeps_positive_extents():
    cfg = BackboneConfig(frames=8, height=8, width=8,
                         temporal_strides=(2, 2, 2, 2, 2),
                         spatial_strides=(2, 2, 2, 2, 2))
    for t, h, w in cfg.block_extents():
        assert min(t, h, w) >= 1


def test_gradients_reach_every_parameter(toy_backbone):
    feats = toy_backbone(clip(seed=9))
    ops.sum_all(feats.g5).backward()
    dead = [n for n, p in toy_backbone.named_parameters()
            if p.grad is None or not np.any(p.grad)]
    toy_backbone.zero_grad()
    assert dead == []


def test_channel_width_ordering_enforced():
    with pytest.raises(ConfigurationError, match="non-decreasing"):
        BackboneConfig(channels=(8, 16, 48, 32, 24))

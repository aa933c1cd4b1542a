"""Token projection: pooled layer tokens, assembly, temporal variant, sharing."""

import numpy as np
import pytest

from dyadnet import nn
from dyadnet.nn import ops
from dyadnet.errors import ConfigurationError
from dyadnet.models import (BackboneConfig, BlockFeatures, DualPathModel,
                            ArchConfig, ProjectionConfig, StreamProjector)


BC = BackboneConfig()
EXTENTS = BC.block_extents()


def make_feats(batch=2, seed=0, fill=None):
    r = np.random.default_rng(seed)
    tensors = []
    for bi in (2, 3, 4):
        c = BC.channels[bi]
        t, h, w = EXTENTS[bi]
        data = (np.full((batch, c, t, h, w), fill, np.float32) if fill is not None
                else r.standard_normal((batch, c, t, h, w)).astype(np.float32))
        tensors.append(nn.Tensor(data))
    return BlockFeatures(*tensors)


@pytest.fixture
def projector():
    return StreamProjector(ProjectionConfig(d=24), BC, np.random.default_rng(1))


def clf_token(d=24, seed=5):
    r = np.random.default_rng(seed)
    return nn.Parameter((r.standard_normal((1, 1, d)) * 0.02).astype(np.float32))


def test_constant_g5_matches_hand_composition(projector):
    feats = make_feats(fill=1.0)
    tokens = projector.abstract_project(feats)
    proj5 = projector.block_proj[2]
    pooled = np.ones(BC.channels[4], dtype=np.float32)
    hand = ops.linear(ops.gelu(nn.Tensor(pooled[None, :])), proj5.weight, proj5.bias)
    assert np.allclose(tokens[2].data[0], hand.data[0], atol=1e-6)


def test_zero_features_zero_token(projector):
    feats = make_feats(fill=0.0)
    for proj in projector.block_proj:
        proj.bias.data[...] = 0.0
    tokens = projector.abstract_project(feats)
    for tok in tokens:
        assert np.allclose(tok.data, 0.0, atol=1e-7)


def test_identical_batch_rows_identical_tokens(projector):
    feats1 = make_feats(batch=1, seed=3)
    feats2 = BlockFeatures(*(nn.Tensor(np.repeat(g.data, 2, axis=0))
                             for g in (feats1.g3, feats1.g4, feats1.g5)))
    tokens = projector.abstract_project(feats2)
    for tok in tokens:
        assert np.allclose(tok.data[0], tok.data[1], atol=1e-7)


def test_assemble_token_count_is_blocks_plus_one(projector):
    seq = projector(make_feats(), clf_token())
    assert seq.tokens.shape[1] == 4
    assert seq.layout == ("clf", "block3", "block4", "block5")


def test_assemble_zero_pe_rows_are_layernormed_inputs(projector):
    projector.pos.data[...] = 0.0
    tokens = projector.abstract_project(make_feats(seed=11))
    seq = projector.assemble_tokens(tokens, clf_token())
    want = ops.layer_norm(nn.Tensor(tokens[0].data[:, None, :]),
                          projector.norm.gamma, projector.norm.beta).data
    assert np.allclose(seq.tokens.data[:, 1:2, :], want, atol=1e-6)


def test_nonzero_pe_breaks_token_permutation(projector):
    tokens = projector.abstract_project(make_feats(seed=12))
    seq = projector.assemble_tokens(tokens, clf_token())
    swapped = projector.assemble_tokens([tokens[1], tokens[0], tokens[2]],
                                        clf_token())
    assert not np.allclose(seq.tokens.data[:, 1, :], swapped.tokens.data[:, 2, :],
                           atol=1e-5)


def test_abstract_mode_position_permutation_invariance(projector):
    feats = make_feats(seed=13)
    base = projector(feats, clf_token()).tokens.data
    r = np.random.default_rng(0)
    shuffled = []
    for g in (feats.g3, feats.g4, feats.g5):
        flat = g.data.reshape(g.shape[0], g.shape[1], -1)
        perm = r.permutation(flat.shape[-1])
        shuffled.append(nn.Tensor(np.ascontiguousarray(
            flat[:, :, perm].reshape(g.shape))))
    out = projector(BlockFeatures(*shuffled), clf_token()).tokens.data
    assert np.abs(base - out).max() < 1e-6


def test_block5_only_projection():
    proj = StreamProjector(ProjectionConfig(d=24, blocks=(5,)), BC,
                           np.random.default_rng(2))
    seq = proj(make_feats(), clf_token())
    assert seq.tokens.shape[1] == 2
    assert seq.layout == ("clf", "block5")


def test_channel_mismatch_is_configuration_error(projector):
    feats = make_feats()
    bad = BlockFeatures(feats.g4, feats.g3, feats.g5)
    with pytest.raises(ConfigurationError, match="channels"):
        projector.abstract_project(bad)


# --- temporal variant -------------------------------------------------------

TEMPORAL_BC = BackboneConfig(temporal_strides=(1, 1, 1, 1, 1))


@pytest.fixture
def temporal_projector():
    return StreamProjector(ProjectionConfig(mode="temporal", d=24), TEMPORAL_BC,
                           np.random.default_rng(4))


def g5_tensor(batch=2, seed=0, fill=None):
    c = TEMPORAL_BC.channels[4]
    t, h, w = TEMPORAL_BC.block_extents()[4]
    r = np.random.default_rng(seed)
    data = (np.full((batch, c, t, h, w), fill, np.float32) if fill is not None
            else r.standard_normal((batch, c, t, h, w)).astype(np.float32))
    return nn.Tensor(data)


def test_temporal_token_count_frames_plus_one(temporal_projector):
    t5 = TEMPORAL_BC.block_extents()[4][0]
    seq = temporal_projector.temporal_project(g5_tensor(), clf_token())
    assert seq.tokens.shape[1] == t5 + 1
    assert seq.layout[0] == "clf"
    assert seq.layout[1] == "frame0"


def test_temporal_constant_input_identical_frame_tokens(temporal_projector):
    g5 = g5_tensor(fill=0.7)
    pooled = ops.avg_pool2d_spatial(g5)
    frames = ops.transpose(pooled, (0, 2, 1))
    toks = temporal_projector.frame_proj(ops.relu(frames)).data
    assert np.abs(toks - toks[:, :1, :]).max() < 1e-6


def test_temporal_zero_input_zero_frame_tokens(temporal_projector):
    temporal_projector.frame_proj.bias.data[...] = 0.0
    g5 = g5_tensor(fill=0.0)
    toks = temporal_projector.frame_proj(
        ops.relu(ops.transpose(ops.avg_pool2d_spatial(g5), (0, 2, 1)))).data
    assert np.allclose(toks, 0.0)


def test_temporal_spatial_permutation_invariant_frame_order_not(temporal_projector):
    g5 = g5_tensor(seed=9)
    base = temporal_projector.temporal_project(g5, clf_token()).tokens.data
    r = np.random.default_rng(1)
    flat = g5.data.reshape(*g5.shape[:3], -1)
    perm = r.permutation(flat.shape[-1])
    spatial = nn.Tensor(np.ascontiguousarray(flat[..., perm].reshape(g5.shape)))
    assert np.abs(temporal_projector.temporal_project(spatial, clf_token())
                  .tokens.data - base).max() < 1e-6
    frame_perm = r.permutation(g5.shape[2])
    while np.array_equal(frame_perm, np.arange(g5.shape[2])):
        frame_perm = r.permutation(g5.shape[2])
    reordered = nn.Tensor(np.ascontiguousarray(g5.data[:, :, frame_perm]))
    assert not np.allclose(
        temporal_projector.temporal_project(reordered, clf_token()).tokens.data,
        base, atol=1e-5)


# --- parameter sharing across streams ----------------------------------------

def test_streams_share_projection_but_not_clf_tokens():
    model = DualPathModel(ArchConfig(), np.random.default_rng(0))
    names = [n for n, _ in model.named_parameters()]
    proj_names = [n.split(".")[0] for n in names]
    assert proj_names.count("projector") == len([n for n in names
                                                 if n.startswith("projector.")])
    assert "clf_leader" in names and "clf_assistant" in names
    assert sum(1 for n in names if n.startswith("projector.pos")) == 1
    assert len(names) == len(set(names))

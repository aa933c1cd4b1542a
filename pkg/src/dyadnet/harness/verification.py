"""Gradient-check orchestration: what the `gradcheck` subcommand runs.

Op-level checks run full elementwise central differences on small float64
instances. The end-to-end check builds a miniature dual-path model in
float64 and probes joint random directions per module group; inputs landing
too close to a ReLU kink (where the finite-difference step would straddle
the non-differentiable point) are re-drawn.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import NumericsError
from ..nn import Tensor, ops
from ..nn.gradcheck import (DEFAULT_STEP, GradCheckResult, check_elementwise,
                            check_groups_directional)
from ..models import (ArchConfig, BackboneConfig, DualPathModel, GlaConfig,
                      ProjectionConfig)

OP_TOL = 1e-5
MODEL_TOL = 1e-4


def _t(rng: np.random.Generator, *shape: int, offset: float = 0.0) -> Tensor:
    data = rng.standard_normal(shape)
    if offset:
        data = np.where(data >= 0, data + offset, data - offset)
    return Tensor(data.astype(np.float64), requires_grad=True)


def _scalarize(out: Tensor, rng: np.random.Generator) -> Tensor:
    probe = Tensor(rng.standard_normal(out.shape).astype(np.float64))
    return ops.sum_all(ops.mul(out, probe))


def op_gradcheck_cases(seed: int) -> dict[str, tuple[Callable[[], Tensor], list[Tensor], list[str]]]:
    """Per-op scalar objective plus the tensors to differentiate."""
    rng = np.random.default_rng(seed)
    cases: dict[str, tuple] = {}

    x = _t(rng, 1, 2, 3, 5, 5)
    w = _t(rng, 3, 2, 2, 3, 3)
    b = _t(rng, 3)
    pr = np.random.default_rng(seed + 1)
    cases["conv3d"] = (
        lambda: _scalarize(ops.conv3d(x, w, b, stride=(1, 2, 2), padding=1),
                           np.random.default_rng(seed + 100)),
        [x, w, b], ["conv3d/input", "conv3d/weight", "conv3d/bias"])

    xp3 = _t(pr, 2, 3, 2, 3, 3)
    cases["avg_pool3d_global"] = (
        lambda: _scalarize(ops.avg_pool3d_global(xp3), np.random.default_rng(seed + 101)),
        [xp3], ["avg_pool3d_global/input"])

    xp2 = _t(pr, 2, 3, 2, 3, 3)
    cases["avg_pool2d_spatial"] = (
        lambda: _scalarize(ops.avg_pool2d_spatial(xp2), np.random.default_rng(seed + 102)),
        [xp2], ["avg_pool2d_spatial/input"])

    xl, wl, bl = _t(pr, 2, 3, 4), _t(pr, 5, 4), _t(pr, 5)
    cases["linear"] = (
        lambda: _scalarize(ops.linear(xl, wl, bl), np.random.default_rng(seed + 103)),
        [xl, wl, bl], ["linear/input", "linear/weight", "linear/bias"])

    xn, gn, bn = _t(pr, 2, 3, 6), _t(pr, 6), _t(pr, 6)
    cases["layer_norm"] = (
        lambda: _scalarize(ops.layer_norm(xn, gn, bn), np.random.default_rng(seed + 104)),
        [xn, gn, bn], ["layer_norm/input", "layer_norm/gamma", "layer_norm/beta"])

    xg = _t(pr, 2, 8)
    cases["gelu"] = (
        lambda: _scalarize(ops.gelu(xg), np.random.default_rng(seed + 105)),
        [xg], ["gelu/input"])

    # ReLU inputs offset from the kink so the FD step cannot straddle it.
    xr = _t(pr, 2, 8, offset=0.1)
    cases["relu"] = (
        lambda: _scalarize(ops.relu(xr), np.random.default_rng(seed + 106)),
        [xr], ["relu/input"])

    xs = _t(pr, 2, 5)
    cases["softmax"] = (
        lambda: _scalarize(ops.softmax(xs), np.random.default_rng(seed + 107)),
        [xs], ["softmax/input"])

    d, heads = 8, 2
    q, k, v = _t(pr, 1, 3, d), _t(pr, 1, 4, d), _t(pr, 1, 4, d)
    projs = [_t(pr, d, d) for _ in range(4)]
    biases = [_t(pr, d) for _ in range(4)]
    cases["multi_head_attention"] = (
        lambda: _scalarize(
            ops.multi_head_attention(q, k, v, heads,
                                     projs[0], biases[0], projs[1], biases[1],
                                     projs[2], biases[2], projs[3], biases[3]),
            np.random.default_rng(seed + 108)),
        [q, k, v] + projs + biases,
        ["mha/q", "mha/k", "mha/v", "mha/wq", "mha/wk", "mha/wv", "mha/wo",
         "mha/bq", "mha/bk", "mha/bv", "mha/bo"])

    xe = _t(pr, 3, 4)
    labels = np.array([0, 2, 1])
    cases["cross_entropy"] = (
        lambda: ops.cross_entropy(xe, labels), [xe], ["cross_entropy/logits"])

    return cases


def run_op_gradchecks(seed: int = 0, tol: float = OP_TOL,
                      only: str | None = None,
                      step: float = DEFAULT_STEP) -> list[GradCheckResult]:
    cases = op_gradcheck_cases(seed)
    if only is not None:
        if only not in cases:
            raise NumericsError(
                f"no gradcheck case for op {only!r}; known: {sorted(cases)}"
            )
        cases = {only: cases[only]}
    results: list[GradCheckResult] = []
    for _, (f, tensors, names) in cases.items():
        results.extend(check_elementwise(f, tensors, names, tol=tol, step=step))
    return results


def mini_arch(classes: int = 4) -> ArchConfig:
    """Smallest dual-path config exercising every module, cheap in float64."""
    return ArchConfig(
        model="gla",
        classes=classes,
        backbone=BackboneConfig(channels=(2, 3, 4, 5, 6),
                                frames=8, height=16, width=16),
        projection=ProjectionConfig(d=16),
        gla=GlaConfig(heads=4, d=16),
    )


def run_model_gradcheck(seed: int = 0, tol: float = MODEL_TOL,
                        step: float = DEFAULT_STEP) -> list[GradCheckResult]:
    """End-to-end check: backbone -> projection -> fusion -> head -> loss."""
    arch = mini_arch()
    rng = np.random.default_rng(seed)
    model = DualPathModel(arch, rng, dtype=np.float64)
    bc = arch.backbone
    labels = np.arange(2) % arch.classes
    lead = Tensor(rng.standard_normal(
        (2, bc.in_channels, bc.frames, bc.height, bc.width)), requires_grad=True)
    asst = Tensor(rng.standard_normal(
        (2, bc.in_channels, bc.frames, bc.height, bc.width)), requires_grad=True)

    def f() -> Tensor:
        loss, _ = model.training_loss(lead, asst, labels)
        return loss

    groups: dict[str, list[Tensor]] = {
        "inputs": [lead, asst],
        "backbone": [p for _, p in model.backbone.named_parameters()],
        "projection": ([p for _, p in model.projector.named_parameters()]
                       + [model.clf_leader, model.clf_assistant]),
        "fusion": [p for _, p in model.fusion.named_parameters()],
        "head": [p for _, p in model.head.named_parameters()],
    }
    ops.track_relu_kinks(True)
    try:
        return check_groups_directional(
            f, groups, np.random.default_rng(seed + 999), tol=tol, step=step,
            kink_signature=ops.relu_sign_signature)
    finally:
        ops.track_relu_kinks(False)

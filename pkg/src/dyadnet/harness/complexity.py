"""Complexity accounting: parameters, analytic FLOPs, wall-clock latency.

FLOP counts are multiply-adds times two, summed over conv / linear /
attention layers only (normalisation, softmax and pooling are negligible and
excluded by convention). Counts are exactly additive over layers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..nn import Module, Tensor, no_grad
from ..models import ArchConfig, build_model


def count_params(model: Module) -> int:
    return model.count_params()


def estimate_flops(model: Module, batch: int = 1) -> float:
    """Forward multiply-add count (x2) for `batch` clip pairs."""
    return model.flops(batch)


@dataclass
class LatencyStats:
    median_ms: float
    p95_ms: float
    mean_ms: float
    repeats: int


def benchmark_latency(model: Module, arch: ArchConfig, repeats: int = 20,
                      warmup: int = 3, batch: int = 1,
                      seed: int = 0) -> LatencyStats:
    """Wall time of a forward pass over one batch of clip pairs, after warmup."""
    bc = arch.backbone
    rng = np.random.default_rng(seed)
    lead = Tensor(rng.random((batch, bc.in_channels, bc.frames, bc.height,
                              bc.width), dtype=np.float32))
    asst = Tensor(rng.random((batch, bc.in_channels, bc.frames, bc.height,
                              bc.width), dtype=np.float32))
    times = []
    with no_grad():
        for _ in range(warmup):
            model.predict_scores(lead, asst)
        for _ in range(repeats):
            t0 = time.perf_counter()
            model.predict_scores(lead, asst)
            times.append((time.perf_counter() - t0) * 1000.0)
    arr = np.asarray(times)
    return LatencyStats(median_ms=float(np.median(arr)),
                        p95_ms=float(np.percentile(arr, 95)),
                        mean_ms=float(arr.mean()), repeats=repeats)


def complexity_report(arch: ArchConfig, seed: int = 0, repeats: int = 20) -> dict:
    """Table-shaped complexity row: params (M), GFLOPs per clip pair, latency."""
    model = build_model(arch, seed)
    params = count_params(model)
    flops = estimate_flops(model, batch=1)
    latency = benchmark_latency(model, arch, repeats=repeats)
    return {
        "model": arch.model,
        "params": params,
        "params_m": params / 1e6,
        "gflops_per_clip": flops / 1e9,
        "median_ms": latency.median_ms,
        "p95_ms": latency.p95_ms,
        "repeats": latency.repeats,
    }

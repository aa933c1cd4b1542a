"""Motion primitives and clip rendering for the synthetic dyadic corpus.

Each clip shows one filled square (side = height/4) moving over a dark
background along a parametric trajectory. Phase arithmetic is done modulo the
period before any trig call, so frame f and frame f+period are bit-identical
at zero noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GenerationError

STILL = "still"
HORIZONTAL = "horizontal-oscillation"
VERTICAL = "vertical-oscillation"
CIRCULAR = "circular"
ZIGZAG = "zigzag"
EXPAND = "expand-contract"

PRIMITIVE_KINDS = (STILL, HORIZONTAL, VERTICAL, CIRCULAR, ZIGZAG, EXPAND)


@dataclass(frozen=True)
class MotionPrimitive:
    kind: str
    amplitude: float = 8.0
    period: int = 8
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in PRIMITIVE_KINDS:
            raise GenerationError(f"unknown motion primitive {self.kind!r}")
        if self.period < 2:
            raise GenerationError(f"period must be >= 2 frames, got {self.period}")
        if self.amplitude < 0:
            raise GenerationError(f"amplitude must be >= 0, got {self.amplitude}")

    def shifted(self, extra_phase: float) -> "MotionPrimitive":
        return MotionPrimitive(self.kind, self.amplitude, self.period,
                               self.phase + extra_phase)


def _triangle(u: np.ndarray) -> np.ndarray:
    """Triangle wave over [0, 1) with range [-1, 1], starting at -1."""
    return 1.0 - 4.0 * np.abs((u % 1.0) - 0.5)


def square_geometry(primitive: MotionPrimitive, frames: int, height: int,
                    width: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame (x0, y0, side) of the drawn square, validated in-bounds.

    Horizontal oscillation runs along an upper lane and vertical along a
    right-side lane; the other kinds are frame-centred. Distinct lanes keep
    the rendered kinds far apart in raw pixel space.
    """
    base_side = height // 4
    f = np.arange(frames, dtype=np.float64)
    z = ((f + primitive.phase) % primitive.period) / primitive.period
    a = primitive.amplitude
    cx, cy = width / 2.0, height / 2.0
    kind = primitive.kind
    if kind == STILL:
        dx = dy = np.zeros(frames)
        side = np.full(frames, base_side)
    elif kind == HORIZONTAL:
        cy = height / 4.0
        dx, dy = a * np.sin(2 * np.pi * z), np.zeros(frames)
        side = np.full(frames, base_side)
    elif kind == VERTICAL:
        cx = 3.0 * width / 4.0
        dx, dy = np.zeros(frames), a * np.sin(2 * np.pi * z)
        side = np.full(frames, base_side)
    elif kind == CIRCULAR:
        dx, dy = a * np.cos(2 * np.pi * z), a * np.sin(2 * np.pi * z)
        side = np.full(frames, base_side)
    elif kind == ZIGZAG:
        dx = a * _triangle(z)
        dy = a * _triangle(2.0 * z)
        side = np.full(frames, base_side)
    else:  # EXPAND
        dx = dy = np.zeros(frames)
        side = np.maximum(1, np.round(base_side + a * np.sin(2 * np.pi * z)))
    x0 = np.round(cx + dx - side / 2.0).astype(np.int64)
    y0 = np.round(cy + dy - side / 2.0).astype(np.int64)
    side = side.astype(np.int64)
    if (x0 < 0).any() or (y0 < 0).any() or (x0 + side > width).any() \
            or (y0 + side > height).any():
        bad = int(np.argmax((x0 < 0) | (y0 < 0) | (x0 + side > width)
                            | (y0 + side > height)))
        raise GenerationError(
            f"{kind} trajectory leaves the {height}x{width} frame at frame {bad} "
            f"(amplitude {a} too large)"
        )
    return x0, y0, side


def render_clip(primitive: MotionPrimitive, frames: int, height: int, width: int,
                noise_sigma: float, seed: int, channels: int = 3) -> np.ndarray:
    """Render one stream: [channels, frames, height, width] float32 in [0, 1]."""
    if height < 8 or width < 8:
        raise GenerationError(f"spatial extents must be >= 8x8, got {height}x{width}")
    if frames < 8:
        raise GenerationError(f"clips need at least 8 frames, got {frames}")
    x0, y0, side = square_geometry(primitive, frames, height, width)
    clip = np.zeros((channels, frames, height, width), dtype=np.float32)
    for f in range(frames):
        clip[:, f, y0[f]:y0[f] + side[f], x0[f]:x0[f] + side[f]] = 1.0
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        clip += rng.normal(0.0, noise_sigma, clip.shape).astype(np.float32)
        np.clip(clip, 0.0, 1.0, out=clip)
    return clip

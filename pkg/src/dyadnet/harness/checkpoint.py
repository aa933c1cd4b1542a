"""Checkpoint serialisation.

Binary layout (little-endian):

    magic b"GLCK", version u8
    u32 length, JSON blob: config snapshot, epoch, RNG state, optimiser
        hyperparameters, record counts
    parameter records:  u16 name length, name utf-8, u8 rank,
                        u32 extent per axis, float32 payload
    optimiser buffers:  same record encoding
    u32 CRC32 over every preceding byte

Reload restores parameters, momentum buffers and the shuffle RNG exactly, so
a resumed run continues bit-identically.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..nn import Module, SGD

MAGIC = b"GLCK"
VERSION = 1


@dataclass
class CheckpointState:
    config: dict
    epoch: int
    rng_state: dict
    lr: float
    momentum: float
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]


def _pack_record(name: str, arr: np.ndarray) -> bytes:
    nb = name.encode("utf-8")
    parts = [struct.pack("<H", len(nb)), nb, struct.pack("<B", arr.ndim)]
    parts += [struct.pack("<I", e) for e in arr.shape]
    parts.append(arr.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def _unpack_record(blob: bytes, off: int) -> tuple[str, np.ndarray, int]:
    (nlen,) = struct.unpack_from("<H", blob, off)
    off += 2
    name = blob[off:off + nlen].decode("utf-8")
    off += nlen
    (rank,) = struct.unpack_from("<B", blob, off)
    off += 1
    shape = struct.unpack_from(f"<{rank}I", blob, off)
    off += 4 * rank
    n = int(np.prod(shape)) if rank else 1
    arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(shape)
    off += 4 * n
    return name, arr.astype(np.float32), off


def save_checkpoint(path: str | Path, model: Module, optimizer: SGD,
                    config_snapshot: dict, epoch: int, rng: np.random.Generator) -> None:
    named = model.named_parameters()
    meta = {
        "config": config_snapshot,
        "epoch": epoch,
        "rng_state": rng.bit_generator.state,
        "lr": optimizer.lr,
        "momentum": optimizer.momentum,
        "param_count": len(named),
        "buffer_count": len(optimizer.buffers),
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<B", VERSION), struct.pack("<I", len(blob)), blob]
    for name, p in named:
        parts.append(_pack_record(name, p.data))
    for name, _ in named:
        parts.append(_pack_record(name, optimizer.buffers[name]))
    body = b"".join(parts)
    out = body + struct.pack("<I", zlib.crc32(body))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(out)


def load_checkpoint(path: str | Path) -> CheckpointState:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < 13:
        raise FormatError(f"{path}: truncated checkpoint")
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version = blob[4]
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    crc = zlib.crc32(blob[:-4])
    if crc != crc_stored:
        raise FormatError(
            f"{path}: CRC mismatch (stored {crc_stored:08x}, computed {crc:08x})"
        )
    (jlen,) = struct.unpack_from("<I", blob, 5)
    off = 9
    try:
        meta = json.loads(blob[off:off + jlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed metadata block: {exc}") from exc
    off += jlen
    params: dict[str, np.ndarray] = {}
    for _ in range(meta["param_count"]):
        name, arr, off = _unpack_record(blob, off)
        params[name] = arr
    buffers: dict[str, np.ndarray] = {}
    for _ in range(meta["buffer_count"]):
        name, arr, off = _unpack_record(blob, off)
        buffers[name] = arr
    if off != len(blob) - 4:
        raise FormatError(f"{path}: trailing bytes after records")
    return CheckpointState(config=meta["config"], epoch=meta["epoch"],
                           rng_state=meta["rng_state"], lr=meta["lr"],
                           momentum=meta["momentum"], params=params, buffers=buffers)


def restore_model(model: Module, state: CheckpointState) -> None:
    """Copy saved tensors into the model, validating names and shapes."""
    named = dict(model.named_parameters())
    missing = set(named) - set(state.params)
    extra = set(state.params) - set(named)
    if missing or extra:
        raise FormatError(
            f"checkpoint/model parameter sets differ "
            f"(missing: {sorted(missing)[:3]}, unexpected: {sorted(extra)[:3]})"
        )
    for name, p in named.items():
        arr = state.params[name]
        if arr.shape != p.data.shape:
            raise FormatError(
                f"shape mismatch for parameter '{name}': checkpoint "
                f"{arr.shape}, model {p.data.shape}"
            )
        p.data[...] = arr


def restore_optimizer(optimizer: SGD, state: CheckpointState) -> None:
    for name in optimizer.buffers:
        if name not in state.buffers:
            raise FormatError(f"checkpoint missing optimiser buffer '{name}'")
        arr = state.buffers[name]
        if arr.shape != optimizer.buffers[name].shape:
            raise FormatError(
                f"shape mismatch for buffer '{name}': checkpoint {arr.shape}, "
                f"model {optimizer.buffers[name].shape}"
            )
        optimizer.buffers[name][...] = arr

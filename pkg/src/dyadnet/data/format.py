"""On-disk formats: the binary clip-pair file and the JSONL manifest.

Clip-pair file layout (all little-endian):

    magic  b"DYD1"
    header version u8, channels u16, frames u16, height u16, width u16,
           label u16, sync-mode u8 (0 async / 1 sync), seed u64
    leader payload   float32 row-major
    assistant payload float32 row-major
    crc32 u32 over both payloads

Per-pair generation knobs that the pinned header has no field for (jitter,
noise sigma) travel in the dataset-level metadata file instead; a ClipPair
read back from disk carries None for them.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"DYD1"
VERSION = 1
_HEADER = struct.Struct("<BHHHHHBQ")

ASYNC = "async"
SYNC = "sync"
_SYNC_CODE = {ASYNC: 0, SYNC: 1}
_SYNC_NAME = {0: ASYNC, 1: SYNC}


@dataclass
class ClipPair:
    leader: np.ndarray
    assistant: np.ndarray
    label: int
    seed: int
    sync_mode: str
    jitter: float | None = None
    noise_sigma: float | None = None

    def __post_init__(self):
        if self.leader.shape != self.assistant.shape:
            raise FormatError(
                f"leader/assistant extents differ: {self.leader.shape} vs "
                f"{self.assistant.shape}"
            )
        if self.leader.ndim != 4:
            raise FormatError(f"clips must be [c, t, h, w], got {self.leader.shape}")
        if self.sync_mode not in _SYNC_CODE:
            raise FormatError(f"sync mode must be async or sync, got {self.sync_mode!r}")


def write_clip_pair(path: str | Path, pair: ClipPair) -> None:
    c, t, h, w = pair.leader.shape
    payload = (pair.leader.astype("<f4", copy=False).tobytes()
               + pair.assistant.astype("<f4", copy=False).tobytes())
    header = _HEADER.pack(VERSION, c, t, h, w, pair.label,
                          _SYNC_CODE[pair.sync_mode], pair.seed)
    crc = zlib.crc32(payload)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def read_clip_pair(path: str | Path) -> ClipPair:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read clip pair {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + _HEADER.size + 4:
        raise FormatError(f"{path}: truncated before header")
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, c, t, h, w, label, sync_code, seed = _HEADER.unpack_from(blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if sync_code not in _SYNC_NAME:
        raise FormatError(f"{path}: unknown sync-mode byte {sync_code}")
    n = c * t * h * w
    start = 4 + _HEADER.size
    expected = start + 2 * n * 4 + 4
    if len(blob) != expected:
        raise FormatError(
            f"{path}: truncated or oversized ({len(blob)} bytes, expected {expected})"
        )
    payload = blob[start:-4]
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    crc = zlib.crc32(payload)
    if crc != crc_stored:
        raise FormatError(
            f"{path}: payload CRC mismatch (stored {crc_stored:08x}, computed {crc:08x})"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    leader = flat[:n].reshape(c, t, h, w).astype(np.float32)
    assistant = flat[n:].reshape(c, t, h, w).astype(np.float32)
    return ClipPair(leader, assistant, label, seed, _SYNC_NAME[sync_code])


@dataclass
class ManifestRecord:
    path: str
    label: int
    seed: int
    sync: str
    split: str


@dataclass
class Manifest:
    records: list[ManifestRecord]

    def __post_init__(self):
        paths = [r.path for r in self.records]
        if len(set(paths)) != len(paths):
            raise FormatError("manifest contains duplicate clip-pair paths")
        for r in self.records:
            if r.split not in ("train", "test"):
                raise FormatError(f"unknown split tag {r.split!r} for {r.path}")

    def split(self, tag: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == tag]

    def class_distribution(self) -> dict[str, dict[int, int]]:
        dist: dict[str, dict[int, int]] = {"train": {}, "test": {}}
        for r in self.records:
            dist[r.split][r.label] = dist[r.split].get(r.label, 0) + 1
        return dist


def write_manifest(path: str | Path, manifest: Manifest) -> None:
    with open(path, "w") as fh:
        for r in manifest.records:
            fh.write(json.dumps({"path": r.path, "label": r.label, "seed": r.seed,
                                 "sync": r.sync, "split": r.split}) + "\n")


def read_manifest(path: str | Path) -> Manifest:
    records = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(ManifestRecord(path=obj["path"], label=int(obj["label"]),
                                          seed=int(obj["seed"]), sync=obj["sync"],
                                          split=obj["split"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{path}:{i + 1}: malformed manifest record: {exc}") from exc
    return Manifest(records)

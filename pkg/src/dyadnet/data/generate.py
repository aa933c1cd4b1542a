"""Dataset generation: class tables, per-record seeding, on-disk layout.

Class design makes fusion necessary: the class id is an injective function of
the (leader primitive, assistant primitive) pair, while each marginal is
many-to-one. In the default 6-class table every leader primitive appears in
exactly 2 classes and every assistant primitive in 3, so a perfect
leader-only classifier tops out at 1/2 and an assistant-only one at 1/3.

Three built-in tables:
  * async6: the default above; discriminative signal is which primitive each
    stream performs, with per-stream random phases in async mode.
  * sync6: both streams perform the same primitive; classes differ only in
    the intrinsic phase offset between the streams (in-phase vs anti-phase),
    so per-stream marginals are identical and only cross-stream timing
    separates the classes.
  * scale6: same primitive pairs at small vs large amplitude; classes differ
    in motion scale rather than motion type.

Every record derives its own seed from (master seed, record index) through
SeedSequence, so generation parallelises per record and regeneration is
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import json

import numpy as np

from ..errors import ConfigurationError, GenerationError
from .format import (ASYNC, SYNC, ClipPair, Manifest, ManifestRecord,
                     read_clip_pair, write_clip_pair, write_manifest)
from .primitives import (CIRCULAR, EXPAND, HORIZONTAL, STILL, VERTICAL,
                         MotionPrimitive, render_clip)

META_FILE = "dataset_meta.json"
MANIFEST_FILE = "manifest.jsonl"


@dataclass(frozen=True)
class ClassSpec:
    class_id: int
    leader: MotionPrimitive
    assistant: MotionPrimitive


def async6_classes() -> list[ClassSpec]:
    """3 leader x 2 assistant primitives, joint map injective.

    Oscillation amplitudes stay below half the square side, so the worst
    same-kind phase mismatch is still closer in pixel space than any
    cross-kind pair (the 1-NN separability ladder depends on this).
    """
    leaders = [MotionPrimitive(HORIZONTAL, amplitude=3.5),
               MotionPrimitive(VERTICAL, amplitude=3.5),
               MotionPrimitive(STILL)]
    assistants = [MotionPrimitive(HORIZONTAL, amplitude=3.5),
                  MotionPrimitive(EXPAND, amplitude=2.0)]
    return [ClassSpec(i * len(assistants) + j, lead, asst)
            for i, lead in enumerate(leaders)
            for j, asst in enumerate(assistants)]


def sync6_classes() -> list[ClassSpec]:
    """Both streams run the same primitive; classes differ only in whether the
    assistant is in phase or half a period ahead. Per-stream marginals are
    identical within each primitive pair, so only cross-stream timing
    separates in-phase from anti-phase."""
    pairs = [MotionPrimitive(HORIZONTAL, amplitude=3.5),
             MotionPrimitive(EXPAND, amplitude=2.0),
             MotionPrimitive(CIRCULAR, amplitude=7.0)]
    out = []
    for i, prim in enumerate(pairs):
        half = prim.period / 2.0
        out.append(ClassSpec(2 * i, prim, prim))
        out.append(ClassSpec(2 * i + 1, prim, prim.shifted(half)))
    return out


def scale6_classes() -> list[ClassSpec]:
    """Same motion kinds at small vs large amplitude: classes differ in the
    spatial scale of the motion rather than its type."""
    kinds = [HORIZONTAL, VERTICAL, CIRCULAR]
    out = []
    for i, kind in enumerate(kinds):
        for j, (lead_amp, asst_amp) in enumerate(((3.0, 2.0), (9.0, 4.0))):
            out.append(ClassSpec(2 * i + j,
                                 MotionPrimitive(kind, amplitude=lead_amp),
                                 MotionPrimitive(EXPAND, amplitude=asst_amp)))
    return out


CLASS_TABLES = {"async6": async6_classes, "sync6": sync6_classes,
                "scale6": scale6_classes}


def _validate_classes(classes: list[ClassSpec]) -> None:
    ids = [c.class_id for c in classes]
    if sorted(ids) != list(range(len(classes))):
        raise ConfigurationError(f"class ids must be 0..{len(classes) - 1}, got {ids}")
    pairs = {(c.leader, c.assistant) for c in classes}
    if len(pairs) != len(classes):
        raise ConfigurationError(
            "class table is not injective: two classes share the same "
            "(leader, assistant) primitive pair"
        )


def record_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def make_clip_pair(spec: ClassSpec, seed: int, sync_mode: str, jitter: float | None,
                   sigma: float, frames: int, height: int, width: int,
                   channels: int = 3) -> ClipPair:
    """Render one labelled pair. Phase draws are integers in [0, jitter]."""
    rng = np.random.default_rng(seed)
    max_j_leader = int(min(jitter, spec.leader.period) if jitter is not None
                       else spec.leader.period)
    max_j_assist = int(min(jitter, spec.assistant.period) if jitter is not None
                       else spec.assistant.period)
    phase_leader = int(rng.integers(0, max(1, max_j_leader)))
    if sync_mode == SYNC:
        phase_assistant = phase_leader
    elif sync_mode == ASYNC:
        phase_assistant = int(rng.integers(0, max(1, max_j_assist)))
    else:
        raise ConfigurationError(f"sync mode must be async or sync, got {sync_mode!r}")
    leader = render_clip(spec.leader.shifted(phase_leader), frames, height, width,
                         sigma, seed=int(rng.integers(0, 2**63)), channels=channels)
    assistant = render_clip(spec.assistant.shifted(phase_assistant), frames, height,
                            width, sigma, seed=int(rng.integers(0, 2**63)),
                            channels=channels)
    return ClipPair(leader, assistant, spec.class_id, seed, sync_mode,
                    jitter=jitter, noise_sigma=sigma)


def generate_dataset(classes: list[ClassSpec], out_dir: str | Path,
                     train_per_class: int = 40, test_per_class: int = 10,
                     sync_mode: str = ASYNC, jitter: float | None = None,
                     sigma: float = 0.05, seed: int = 0, frames: int = 16,
                     height: int = 32, width: int = 32, channels: int = 3,
                     table_name: str = "custom") -> Manifest:
    """Write clip-pair files plus manifest and metadata; returns the manifest."""
    _validate_classes(classes)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise GenerationError(f"cannot create output dir {out_dir}: {exc}") from exc
    records: list[ManifestRecord] = []
    index = 0
    for split, count in (("train", train_per_class), ("test", test_per_class)):
        for spec in classes:
            for i in range(count):
                rseed = record_seed(seed, index)
                index += 1
                pair = make_clip_pair(spec, rseed, sync_mode, jitter, sigma,
                                      frames, height, width, channels)
                rel = f"{split}/class{spec.class_id:02d}_{i:04d}.dyd"
                try:
                    write_clip_pair(out_dir / rel, pair)
                except OSError as exc:
                    raise GenerationError(f"failed writing {out_dir / rel}: {exc}") from exc
                records.append(ManifestRecord(path=rel, label=spec.class_id,
                                              seed=rseed, sync=sync_mode, split=split))
    manifest = Manifest(records)
    write_manifest(out_dir / MANIFEST_FILE, manifest)
    meta = {
        "table": table_name,
        "classes": [
            {"class_id": c.class_id,
             "leader": vars(c.leader) | {"kind": c.leader.kind},
             "assistant": vars(c.assistant) | {"kind": c.assistant.kind}}
            for c in classes
        ],
        "train_per_class": train_per_class,
        "test_per_class": test_per_class,
        "sync_mode": sync_mode,
        "jitter": jitter,
        "noise_sigma": sigma,
        "seed": seed,
        "geometry": {"channels": channels, "frames": frames,
                     "height": height, "width": width},
        "class_distribution": manifest.class_distribution(),
    }
    (out_dir / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return manifest


@dataclass
class LoadedSplit:
    """One split held in memory as stacked arrays."""

    leaders: np.ndarray    # [n, c, t, h, w] float32
    assistants: np.ndarray
    labels: np.ndarray     # [n] int64

    def __len__(self) -> int:
        return len(self.labels)


def load_split(data_dir: str | Path, manifest: Manifest, split: str) -> LoadedSplit:
    recs = manifest.split(split)
    if not recs:
        raise GenerationError(f"split {split!r} is empty in {data_dir}")
    leaders, assistants, labels = [], [], []
    for r in recs:
        pair = read_clip_pair(Path(data_dir) / r.path)
        leaders.append(pair.leader)
        assistants.append(pair.assistant)
        labels.append(pair.label)
    return LoadedSplit(np.stack(leaders), np.stack(assistants),
                       np.asarray(labels, dtype=np.int64))

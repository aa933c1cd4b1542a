"""Run configuration: one JSON-serialisable object drives every run.

Every field has a default; a config file may specify any subset and CLI flags
override file values. The same dict snapshot is embedded in checkpoints so a
run can be reproduced from its artifact alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..errors import ConfigurationError
from ..models import ArchConfig, BackboneConfig, GlaConfig, ProjectionConfig


@dataclass(frozen=True)
class RunConfig:
    model: str = "gla"
    classes: int = 6
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    gla: GlaConfig = field(default_factory=GlaConfig)

    batch_size: int = 8
    epochs: int = 30
    lr: float = 0.003
    momentum: float = 0.9
    seed: int = 0

    data_dir: str = ""
    out_dir: str = ""

    clips_per_video: int = 1
    checkpoint_every: int = 0       # 0: only at the end
    strict_deterministic: bool = True
    emit_plots: bool = False

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError(
                f"batch_size/epochs must be positive, got {self.batch_size}/{self.epochs}"
            )
        if self.lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.clips_per_video < 1:
            raise ConfigurationError(
                f"clips_per_video must be >= 1, got {self.clips_per_video}"
            )

    @property
    def arch(self) -> ArchConfig:
        return ArchConfig(model=self.model, classes=self.classes,
                          backbone=self.backbone, projection=self.projection,
                          gla=self.gla)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(obj: dict) -> "RunConfig":
        obj = dict(obj)
        known = RunConfig.__dataclass_fields__
        unknown = set(obj) - set(known)
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")

        def sub(key, cls):
            if key in obj and isinstance(obj[key], dict):
                d = obj[key]
                bad = set(d) - set(cls.__dataclass_fields__)
                if bad:
                    raise ConfigurationError(f"unknown {key} fields: {sorted(bad)}")
                for k, v in d.items():
                    if isinstance(v, list):
                        d[k] = tuple(v)
                obj[key] = cls(**d)

        sub("backbone", BackboneConfig)
        sub("projection", ProjectionConfig)
        sub("gla", GlaConfig)
        return RunConfig(**obj)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Config file plus overrides; flags win over file values."""
    obj: dict = {}
    if path is not None:
        try:
            obj = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if "." in key:
                section, sub = key.split(".", 1)
                obj.setdefault(section, {})
                if not isinstance(obj[section], dict):
                    raise ConfigurationError(f"cannot override {key}: not a section")
                obj[section][sub] = value
            else:
                obj[key] = value
    return RunConfig.from_dict(obj)


def desk_preset(**kwargs) -> RunConfig:
    """Default desk-scale training run (minutes on a laptop CPU)."""
    return replace(RunConfig(), **kwargs)


def temporal_preset(**kwargs) -> RunConfig:
    """Temporal variant: per-frame tokens from block 5.

    The backbone keeps full temporal resolution (all temporal strides 1) so
    frame tokens survive to the projection; spatial pooling alone collapses
    each frame.
    """
    cfg = RunConfig(
        backbone=BackboneConfig(temporal_strides=(1, 1, 1, 1, 1)),
        projection=ProjectionConfig(mode="temporal"),
    )
    return replace(cfg, **kwargs)


def paper_scale_preset(**kwargs) -> RunConfig:
    """Full-scale sizing preset (for complexity reporting; not exercised by
    the test suite). Sizing target is roughly 10.5M parameters."""
    cfg = RunConfig(
        backbone=BackboneConfig(channels=(24, 48, 96, 192, 384),
                                frames=80, height=160, width=160),
        projection=ProjectionConfig(d=768),
        gla=GlaConfig(d=768),
        epochs=100,
    )
    return replace(cfg, **kwargs)


PRESETS = {"desk": desk_preset, "temporal": temporal_preset,
           "paper-scale": paper_scale_preset}

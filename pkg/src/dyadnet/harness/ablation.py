"""Ablation suite: the directional experiments, tabulated.

Cells map one-to-one onto the study axes: stream importance (single streams
vs late fusion vs cross-stream fusion), attention mode (cross vs self),
fusion depth (1 vs 2 modules), tapped-block selection ({3,4,5} vs {5} on the
motion-scale dataset), component knockouts (no projection+no fusion, and
projection without fusion), variant vs synchrony (abstract and temporal on
the async and sync datasets), and the query/key-value input swap evaluated
on the trained fusion model.

The late-fusion model's two submodels receive exactly the updates that
training each stream alone would produce (disjoint parameters, additive
losses), so the single-stream rows are read off the late-fusion run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from ..data import (ASYNC, MANIFEST_FILE, SYNC, async6_classes, generate_dataset,
                    load_split, read_manifest, scale6_classes, sync6_classes)
from ..models import ProjectionConfig
from .config import RunConfig
from .train import TrainResult, evaluate_split, train

DEFAULT_DATA_SEED = 7
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"


@dataclass
class AblationRow:
    experiment: str
    variant: str
    dataset: str
    seed: int
    epochs: int
    accuracy: float


class _SwappedStreams:
    """Evaluation adapter feeding the leader clip into the assistant slot."""

    def __init__(self, model):
        self._model = model

    def predict_scores(self, leader, assistant):
        return self._model.predict_scores(assistant, leader)


def ensure_datasets(root: str | Path, sigma: float = 0.05,
                    train_per_class: int = 40, test_per_class: int = 10,
                    data_seed: int = DEFAULT_DATA_SEED) -> dict[str, Path]:
    """Generate the three ablation corpora (skipping ones already present)."""
    root = Path(root)
    specs = {
        "async6": (async6_classes(), ASYNC),
        "sync6": (sync6_classes(), SYNC),
        "scale6": (scale6_classes(), ASYNC),
    }
    dirs = {}
    for name, (classes, mode) in specs.items():
        d = root / name
        if not (d / MANIFEST_FILE).exists():
            generate_dataset(classes, d, train_per_class=train_per_class,
                             test_per_class=test_per_class, sync_mode=mode,
                             sigma=sigma, seed=data_seed, table_name=name)
        dirs[name] = d
    return dirs


def temporal_config(base: RunConfig) -> RunConfig:
    """Temporal-variant counterpart of a config: frame tokens from block 5,
    backbone keeping full temporal resolution."""
    return replace(
        base,
        backbone=replace(base.backbone, temporal_strides=(1, 1, 1, 1, 1)),
        projection=ProjectionConfig(mode="temporal", d=base.projection.d),
    )


def run_ablation_suite(base: RunConfig, out_dir: str | Path,
                       sigma: float = 0.05, train_per_class: int = 40,
                       test_per_class: int = 10,
                       data_seed: int = DEFAULT_DATA_SEED) -> list[AblationRow]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datasets = ensure_datasets(out_dir / "datasets", sigma=sigma,
                               train_per_class=train_per_class,
                               test_per_class=test_per_class,
                               data_seed=data_seed)
    rows: list[AblationRow] = []
    results: dict[str, TrainResult] = {}
    splits: dict[str, tuple] = {}

    def data(name: str):
        if name not in splits:
            d = datasets[name]
            manifest = read_manifest(d / MANIFEST_FILE)
            splits[name] = (load_split(d, manifest, "train"),
                            load_split(d, manifest, "test"))
        return splits[name]

    def run(tag: str, cfg: RunConfig, dataset: str) -> TrainResult:
        tr, te = data(dataset)
        cfg = replace(cfg, data_dir=str(datasets[dataset]),
                      out_dir=str(out_dir / "runs" / tag))
        res = train(cfg, train_split=tr, test_split=te)
        results[tag] = res
        return res

    def add(experiment: str, variant: str, dataset: str, res_or_acc,
            cfg: RunConfig) -> None:
        acc = (res_or_acc.final_report.accuracy
               if isinstance(res_or_acc, TrainResult) else float(res_or_acc))
        rows.append(AblationRow(experiment=experiment, variant=variant,
                                dataset=dataset, seed=cfg.seed,
                                epochs=cfg.epochs, accuracy=acc))

    # Stream importance: one late-fusion run yields both single-stream rows.
    gla = run("gla_async", replace(base, model="gla"), "async6")
    lf = run("late_fusion_async", replace(base, model="late_fusion"), "async6")
    _, te_async = data("async6")
    frames = base.backbone.frames
    leader_acc = evaluate_split(lf.model.leader_model, te_async, base.classes,
                                frames, batch_size=base.batch_size).accuracy
    assistant_acc = evaluate_split(lf.model.assistant_model, te_async,
                                   base.classes, frames,
                                   batch_size=base.batch_size).accuracy
    add("streams", "leader_only", "async6", leader_acc, base)
    add("streams", "assistant_only", "async6", assistant_acc, base)
    add("streams", "late_fusion", "async6", lf, base)
    add("streams", "gla", "async6", gla, base)

    # Attention mode and fusion depth.
    self_res = run("self_attention_async",
                   replace(base, model="gla", gla=replace(base.gla, attention="self")),
                   "async6")
    add("attention", "cross", "async6", gla, base)
    add("attention", "self", "async6", self_res, base)
    mod2 = run("gla_modules2_async",
               replace(base, model="gla", gla=replace(base.gla, modules=2)),
               "async6")
    add("gla_modules", "1", "async6", gla, base)
    add("gla_modules", "2", "async6", mod2, base)

    # Tapped-block selection on the motion-scale dataset.
    b345 = run("blocks345_scale", replace(base, model="gla"), "scale6")
    b5 = run("block5_scale",
             replace(base, model="gla",
                     projection=replace(base.projection, blocks=(5,))),
             "scale6")
    add("block_selection", "blocks_3_4_5", "scale6", b345, base)
    add("block_selection", "block_5_only", "scale6", b5, base)

    # Component knockouts.
    pooled = run("pooled_concat_async", replace(base, model="pooled_concat"),
                 "async6")
    token = run("token_concat_async", replace(base, model="token_concat"),
                "async6")
    add("components", "no_projection_no_fusion", "async6", pooled, base)
    add("components", "projection_only", "async6", token, base)
    add("components", "projection_and_fusion", "async6", gla, base)

    # Variant vs synchrony.
    tcfg = temporal_config(base)
    abstract_sync = run("abstract_sync", replace(base, model="gla"), "sync6")
    temporal_sync = run("temporal_sync", tcfg, "sync6")
    temporal_async = run("temporal_async", tcfg, "async6")
    add("variant", "abstract", "sync6", abstract_sync, base)
    add("variant", "temporal", "sync6", temporal_sync, tcfg)
    add("variant", "abstract", "async6", gla, base)
    add("variant", "temporal", "async6", temporal_async, tcfg)

    # Query/key-value swap, evaluated on the trained fusion model.
    swapped_acc = evaluate_split(_SwappedStreams(gla.model), te_async,
                                 base.classes, frames,
                                 batch_size=base.batch_size).accuracy
    add("input_swap", "leader_queries", "async6", gla, base)
    add("input_swap", "swapped_eval", "async6", swapped_acc, base)

    _write_report(out_dir, rows)
    return rows


def _write_report(out_dir: Path, rows: list[AblationRow]) -> None:
    with open(out_dir / REPORT_CSV, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(asdict(rows[0]).keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
    (out_dir / REPORT_JSON).write_text(
        json.dumps([asdict(r) for r in rows], indent=2) + "\n")

"""Training and evaluation loops.

Runs are pure functions of (config, dataset): parameter init is seeded, the
shuffle generator is seeded and checkpointed, and strict mode pins thread
pools, so two identical runs produce bit-identical metrics and a resumed run
continues exactly where the checkpoint left off.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, GenerationError, NumericsError
from ..data import MANIFEST_FILE, LoadedSplit, load_split, read_manifest
from ..nn import SGD, Module, Tensor, no_grad
from ..models import build_model
from .checkpoint import (CheckpointState, load_checkpoint, restore_model,
                         restore_optimizer, save_checkpoint)
from .config import RunConfig
from .determinism import strict_mode
from .svg import write_line_plot

FINAL_CHECKPOINT = "checkpoint_final.glck"
METRICS_FILE = "metrics.jsonl"
CONFUSION_FILE = "confusion.csv"


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: list[float]
    confusion: list[list[int]]      # rows: true class, cols: predicted

    def __post_init__(self):
        total = sum(sum(row) for row in self.confusion)
        trace = sum(self.confusion[i][i] for i in range(len(self.confusion)))
        if total and abs(self.accuracy - trace / total) > 1e-9:
            raise NumericsError("confusion matrix inconsistent with accuracy")


@dataclass
class TrainResult:
    model: Module
    optimizer: SGD
    history: list[EpochMetrics]
    final_report: EvalReport
    checkpoint_path: Path | None
    config: RunConfig

    @property
    def best_test_acc(self) -> float:
        return max(m.test_acc for m in self.history)


def _crop_starts(stored: int, frames: int, clips: int) -> np.ndarray:
    """Uniformly spaced temporal crop starts, clamped in-range."""
    if stored < frames:
        raise ConfigurationError(
            f"stored clips have {stored} frames but the model expects {frames}"
        )
    if clips == 1 or stored == frames:
        return np.zeros(max(1, clips), dtype=np.int64)
    starts = np.linspace(0, stored - frames, clips)
    return np.clip(np.round(starts), 0, stored - frames).astype(np.int64)


def predict_split(model: Module, split: LoadedSplit, frames: int,
                  clips_per_video: int = 1, batch_size: int = 8) -> np.ndarray:
    """Average softmax scores over temporal crops; returns [n, k] scores."""
    stored = split.leaders.shape[2]
    starts = _crop_starts(stored, frames, clips_per_video)
    n = len(split)
    chunks = []
    with no_grad():
        for lo in range(0, n, batch_size):
            hi = min(n, lo + batch_size)
            acc = None
            for s in starts:
                lead = Tensor(split.leaders[lo:hi, :, s:s + frames])
                asst = Tensor(split.assistants[lo:hi, :, s:s + frames])
                scores = model.predict_scores(lead, asst)
                acc = scores if acc is None else acc + scores
            chunks.append(acc / len(starts))
    return np.concatenate(chunks, axis=0)


def evaluate_split(model: Module, split: LoadedSplit, classes: int, frames: int,
                   clips_per_video: int = 1, batch_size: int = 8) -> EvalReport:
    scores = predict_split(model, split, frames, clips_per_video, batch_size)
    pred = scores.argmax(axis=1)
    confusion = np.zeros((classes, classes), dtype=np.int64)
    for t, p in zip(split.labels, pred):
        confusion[t, p] += 1
    row_sums = confusion.sum(axis=1)
    per_class = [float(confusion[i, i] / row_sums[i]) if row_sums[i] else 0.0
                 for i in range(classes)]
    acc = float((pred == split.labels).mean())
    return EvalReport(accuracy=acc, per_class_accuracy=per_class,
                      confusion=confusion.tolist())


def evaluate(checkpoint_path: str | Path, data_dir: str | Path,
             clips_per_video: int = 10, split: str = "test") -> EvalReport:
    """Evaluate a stored checkpoint with multi-crop score averaging."""
    state = load_checkpoint(checkpoint_path)
    config = RunConfig.from_dict(state.config)
    model = build_model(config.arch, config.seed)
    restore_model(model, state)
    manifest = read_manifest(Path(data_dir) / MANIFEST_FILE)
    data = load_split(data_dir, manifest, split)
    with strict_mode(config.strict_deterministic):
        return evaluate_split(model, data, config.classes, config.backbone.frames,
                              clips_per_video, config.batch_size)


def _load_dataset(config: RunConfig) -> tuple[LoadedSplit, LoadedSplit]:
    data_dir = Path(config.data_dir)
    manifest_path = data_dir / MANIFEST_FILE
    if not manifest_path.exists():
        raise GenerationError(f"no manifest at {manifest_path}; generate data first")
    manifest = read_manifest(manifest_path)
    train_split = load_split(data_dir, manifest, "train")
    test_split = load_split(data_dir, manifest, "test")
    for name, s in (("train", train_split), ("test", test_split)):
        if s.labels.max() >= config.classes:
            raise ConfigurationError(
                f"{name} split contains label {s.labels.max()} but the model "
                f"has {config.classes} classes"
            )
    return train_split, test_split


def train(config: RunConfig, resume_from: str | Path | None = None,
          train_split: LoadedSplit | None = None,
          test_split: LoadedSplit | None = None) -> TrainResult:
    """Run the configured training; optionally resume from a checkpoint.

    Splits may be passed in directly (the ablation suite reuses loaded data);
    otherwise they are read from config.data_dir.
    """
    if train_split is None or test_split is None:
        train_split, test_split = _load_dataset(config)
    with strict_mode(config.strict_deterministic):
        return _train_loop(config, resume_from, train_split, test_split)


def _train_loop(config: RunConfig, resume_from, train_split, test_split) -> TrainResult:
    model = build_model(config.arch, config.seed)
    optimizer = SGD(model.named_parameters(), lr=config.lr, momentum=config.momentum)
    shuffle_rng = np.random.default_rng(config.seed)
    start_epoch = 0
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        restore_model(model, state)
        restore_optimizer(optimizer, state)
        shuffle_rng.bit_generator.state = state.rng_state
        start_epoch = state.epoch

    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        if start_epoch == 0:
            (out_dir / METRICS_FILE).write_text("")

    frames = config.backbone.frames
    n = len(train_split)
    history: list[EpochMetrics] = []
    last_max_grad = 0.0
    for epoch in range(start_epoch, config.epochs):
        perm = shuffle_rng.permutation(n)
        losses = []
        correct = 0
        for bi, lo in enumerate(range(0, n, config.batch_size)):
            idx = perm[lo:lo + config.batch_size]
            lead = Tensor(train_split.leaders[idx, :, :frames])
            asst = Tensor(train_split.assistants[idx, :, :frames])
            labels = train_split.labels[idx]
            loss, scores = model.training_loss(lead, asst, labels)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericsError(
                    f"non-finite loss at epoch {epoch} batch {bi} "
                    f"(max |grad| last step: {last_max_grad:.3e})"
                )
            loss.backward()
            last_max_grad = max(
                float(np.abs(p.grad).max()) for p in model.parameters()
            )
            optimizer.step()
            optimizer.zero_grad()
            losses.append(value)
            correct += int((scores.argmax(axis=1) == labels).sum())
        test_report = evaluate_split(model, test_split, config.classes, frames,
                                     clips_per_video=1,
                                     batch_size=config.batch_size)
        em = EpochMetrics(epoch=epoch, train_loss=float(np.mean(losses)),
                          train_acc=correct / n, test_acc=test_report.accuracy)
        history.append(em)
        if out_dir:
            with open(out_dir / METRICS_FILE, "a") as fh:
                fh.write(json.dumps(asdict(em)) + "\n")
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(out_dir / f"checkpoint_epoch{epoch + 1:04d}.glck",
                                model, optimizer, config.to_dict(), epoch + 1,
                                shuffle_rng)

    final_report = evaluate_split(model, test_split, config.classes, frames,
                                  clips_per_video=config.clips_per_video,
                                  batch_size=config.batch_size)
    checkpoint_path = None
    if out_dir:
        checkpoint_path = out_dir / FINAL_CHECKPOINT
        save_checkpoint(checkpoint_path, model, optimizer, config.to_dict(),
                        config.epochs, shuffle_rng)
        with open(out_dir / CONFUSION_FILE, "w") as fh:
            for row in final_report.confusion:
                fh.write(",".join(str(v) for v in row) + "\n")
        if config.emit_plots and history:
            write_line_plot(out_dir / "curves.svg",
                            {"train_loss": [m.train_loss for m in history],
                             "train_acc": [m.train_acc for m in history],
                             "test_acc": [m.test_acc for m in history]},
                            title="training curves")
    return TrainResult(model=model, optimizer=optimizer, history=history,
                       final_report=final_report, checkpoint_path=checkpoint_path,
                       config=config)

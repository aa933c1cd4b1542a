"""Command-line entry point.

Subcommands: gen-data, train, eval, gradcheck, ablate, bench. Every run is a
pure function of its config + seed; flags override config-file values. Exit
codes: 0 success, 2 usage error, 3 data/format error, 4 numerical failure,
5 I/O error. Failures emit one machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (ConfigurationError, ContractViolation, DyadnetError,
                     FormatError, GenerationError, NumericsError)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyadnet",
        description="Dual-stream interaction recognition: synthetic data, "
                    "training, evaluation, gradient checking, ablations, "
                    "and complexity benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dyadic dataset")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--table", default="async6", choices=("async6", "sync6", "scale6"),
                   help="built-in class table")
    g.add_argument("--classes", type=int, default=6,
                   help="number of classes (first N of the table, max 6)")
    g.add_argument("--per-class", type=int, default=40, help="training clips per class")
    g.add_argument("--test-per-class", type=int, default=10, help="test clips per class")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--sync", action="store_true", help="lock stream phases")
    mode.add_argument("--async", dest="async_mode", action="store_true",
                      help="independent stream phases (default)")
    g.add_argument("--sigma", type=float, default=0.05, help="pixel noise sigma")
    g.add_argument("--jitter", type=float, default=None,
                   help="max phase offset in frames (default: full period)")
    g.add_argument("--seed", type=int, default=7, help="master generation seed")
    g.add_argument("--frames", type=int, default=16, help="frames per clip")

    t = sub.add_parser("train", help="train a model on a generated dataset")
    t.add_argument("--config", default=None, help="JSON run-config file")
    t.add_argument("--preset", default=None, choices=("desk", "temporal", "paper-scale"),
                   help="start from a named preset instead of defaults")
    t.add_argument("--data", default=None, help="dataset directory")
    t.add_argument("--out", default=None, help="output directory")
    t.add_argument("--seed", type=int, default=None, help="training seed")
    t.add_argument("--model", default=None,
                   help="model variant (gla, late_fusion, single_leader, "
                        "single_assistant, pooled_concat, token_concat)")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--momentum", type=float, default=None)
    t.add_argument("--checkpoint-every", type=int, default=None,
                   help="checkpoint cadence in epochs (0: final only)")
    t.add_argument("--resume", default=None, help="checkpoint to resume from")
    t.add_argument("--no-strict", action="store_true",
                   help="allow multi-threaded kernels (faster, not bit-reproducible)")
    t.add_argument("--plots", action="store_true", help="emit SVG training curves")

    e = sub.add_parser("eval", help="evaluate a checkpoint with multi-crop averaging")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--clips", type=int, default=10,
                   help="temporal crops per video, scores averaged (default 10)")
    e.add_argument("--split", default="test", choices=("train", "test"))

    c = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    c.add_argument("--scope", default="all",
                   help="op name, 'ops', 'model', or 'all'")
    c.add_argument("--seeds", type=int, default=3, help="random seeds per check")

    a = sub.add_parser("ablate", help="run the ablation suite")
    a.add_argument("--base-config", default=None, help="JSON run-config file")
    a.add_argument("--out", required=True, help="report/output directory")
    a.add_argument("--epochs", type=int, default=None)
    a.add_argument("--per-class", type=int, default=40)
    a.add_argument("--test-per-class", type=int, default=10)
    a.add_argument("--sigma", type=float, default=0.05)
    a.add_argument("--seed", type=int, default=None, help="training seed")
    a.add_argument("--data-seed", type=int, default=None, help="generation seed")

    b = sub.add_parser("bench", help="parameters, analytic FLOPs, latency")
    b.add_argument("--config", default=None, help="JSON run-config file")
    b.add_argument("--preset", default=None, choices=("desk", "temporal", "paper-scale"))
    b.add_argument("--repeats", type=int, default=20)
    b.add_argument("--skip-latency", action="store_true",
                   help="report only parameters and FLOPs")
    return parser


def _cmd_gen_data(args) -> int:
    from .data import CLASS_TABLES, SYNC, ASYNC, generate_dataset
    classes = CLASS_TABLES[args.table]()
    if not 2 <= args.classes <= len(classes):
        raise ConfigurationError(
            f"--classes must be in [2, {len(classes)}] for table {args.table}"
        )
    classes = classes[:args.classes]
    sync_mode = SYNC if args.sync else ASYNC
    manifest = generate_dataset(
        classes, args.out, train_per_class=args.per_class,
        test_per_class=args.test_per_class, sync_mode=sync_mode,
        jitter=args.jitter, sigma=args.sigma, seed=args.seed,
        frames=args.frames, table_name=args.table)
    dist = manifest.class_distribution()
    print(f"wrote {len(manifest.records)} clip pairs to {args.out} "
          f"(train per class: {sorted(dist['train'].values())}, "
          f"test per class: {sorted(dist['test'].values())})")
    return EXIT_OK


def _config_from_args(config_path, preset, overrides) -> "RunConfig":
    from .harness import PRESETS, RunConfig, load_config
    if preset is not None:
        base = PRESETS[preset]().to_dict()
        if config_path is not None:
            file_cfg = load_config(config_path).to_dict()
            base.update({k: v for k, v in file_cfg.items()})
        cfg = RunConfig.from_dict(base)
        merged = cfg.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            merged[key] = value
        return RunConfig.from_dict(merged)
    return load_config(config_path, overrides)


def _cmd_train(args) -> int:
    overrides = {
        "data_dir": args.data, "out_dir": args.out, "seed": args.seed,
        "model": args.model, "epochs": args.epochs, "batch_size": args.batch_size,
        "lr": args.lr, "momentum": args.momentum,
        "checkpoint_every": args.checkpoint_every,
    }
    if args.no_strict:
        overrides["strict_deterministic"] = False
    if args.plots:
        overrides["emit_plots"] = True
    cfg = _config_from_args(args.config, args.preset, overrides)
    if not cfg.data_dir:
        raise ConfigurationError("no dataset: pass --data or set data_dir in the config")
    from .harness import train
    result = train(cfg, resume_from=args.resume)
    last = result.history[-1] if result.history else None
    print(f"trained {cfg.model} for {cfg.epochs} epochs "
          f"(final train loss {last.train_loss:.4f}, "
          f"test acc {result.final_report.accuracy:.4f})" if last else
          "training produced no epochs")
    if result.checkpoint_path:
        print(f"checkpoint: {result.checkpoint_path}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .harness import evaluate
    report = evaluate(args.checkpoint, args.data, clips_per_video=args.clips,
                      split=args.split)
    print(json.dumps({
        "accuracy": report.accuracy,
        "per_class_accuracy": report.per_class_accuracy,
        "confusion": report.confusion,
        "clips_per_video": args.clips,
        "split": args.split,
    }, indent=2))
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from .harness import run_model_gradcheck, run_op_gradchecks
    failures = 0
    for seed in range(args.seeds):
        if args.scope in ("all", "ops"):
            results = run_op_gradchecks(seed=seed)
        elif args.scope == "model":
            results = []
        else:
            results = run_op_gradchecks(seed=seed, only=args.scope)
        if args.scope in ("all", "model"):
            results += run_model_gradcheck(seed=seed)
        print(f"# seed {seed}")
        for r in results:
            print(f"  {r}")
            failures += 0 if r.ok else 1
    if failures:
        raise NumericsError(f"{failures} gradient checks failed")
    print("all gradient checks passed")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    from .harness import RunConfig, load_config, run_ablation_suite
    from .harness.ablation import DEFAULT_DATA_SEED
    overrides = {"seed": args.seed, "epochs": args.epochs}
    base = load_config(args.base_config, overrides) if (
        args.base_config or any(v is not None for v in overrides.values())
    ) else RunConfig()
    rows = run_ablation_suite(
        base, args.out, sigma=args.sigma, train_per_class=args.per_class,
        test_per_class=args.test_per_class,
        data_seed=args.data_seed if args.data_seed is not None else DEFAULT_DATA_SEED)
    width = max(len(f"{r.experiment}/{r.variant}") for r in rows)
    for r in rows:
        print(f"{r.experiment + '/' + r.variant:<{width}}  {r.dataset:<7} "
              f"seed={r.seed} epochs={r.epochs}  acc={r.accuracy:.4f}")
    print(f"report: {Path(args.out) / 'report.csv'}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    from .harness import benchmark_latency, count_params, estimate_flops
    from .models import build_model
    cfg = _config_from_args(args.config, args.preset or ("desk" if not args.config else None), {})
    arch = cfg.arch
    model = build_model(arch, cfg.seed)
    params = count_params(model)
    gflops = estimate_flops(model, batch=1) / 1e9
    print(f"model={arch.model} d={arch.projection.d} "
          f"frames={arch.backbone.frames} "
          f"input={arch.backbone.height}x{arch.backbone.width}")
    if args.skip_latency:
        print(f"{'Params(M)':>10} {'GFLOPs':>10}")
        print(f"{params / 1e6:>10.3f} {gflops:>10.3f}")
        return EXIT_OK
    lat = benchmark_latency(model, arch, repeats=args.repeats)
    print(f"{'Params(M)':>10} {'GFLOPs':>10} {'median ms':>10} {'p95 ms':>10}")
    print(f"{params / 1e6:>10.3f} {gflops:>10.3f} {lat.median_ms:>10.1f} "
          f"{lat.p95_ms:>10.1f}")
    print(f"(single clip-pair forward, {lat.repeats} repeats; full-scale "
          f"sizing reference: ~10.5M params, ~77 GFLOPs per clip)")
    return EXIT_OK


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
    "ablate": _cmd_ablate,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (FormatError, GenerationError, ConfigurationError, ContractViolation) as exc:
        print(f'dyadnet-error code={EXIT_DATA} kind={type(exc).__name__} '
              f'msg="{exc}"', file=sys.stderr)
        return EXIT_DATA
    except NumericsError as exc:
        print(f'dyadnet-error code={EXIT_NUMERIC} kind={type(exc).__name__} '
              f'msg="{exc}"', file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f'dyadnet-error code={EXIT_IO} kind={type(exc).__name__} '
              f'msg="{exc}"', file=sys.stderr)
        return EXIT_IO
    except DyadnetError as exc:
        print(f'dyadnet-error code={EXIT_DATA} kind={type(exc).__name__} '
              f'msg="{exc}"', file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

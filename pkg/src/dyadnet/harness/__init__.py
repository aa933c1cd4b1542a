from .config import (PRESETS, RunConfig, desk_preset, load_config,
                     paper_scale_preset, temporal_preset)
from .checkpoint import (CheckpointState, load_checkpoint, restore_model,
                         restore_optimizer, save_checkpoint)
from .determinism import strict_mode
from .train import (CONFUSION_FILE, FINAL_CHECKPOINT, METRICS_FILE, EpochMetrics,
                    EvalReport, TrainResult, evaluate, evaluate_split,
                    predict_split, train)
from .complexity import (LatencyStats, benchmark_latency, complexity_report,
                         count_params, estimate_flops)
from .verification import (MODEL_TOL, OP_TOL, mini_arch, run_model_gradcheck,
                           run_op_gradchecks)
from .ablation import (DEFAULT_DATA_SEED, AblationRow, ensure_datasets,
                       run_ablation_suite, temporal_config)

__all__ = [
    "PRESETS", "RunConfig", "desk_preset", "load_config", "paper_scale_preset",
    "temporal_preset",
    "CheckpointState", "load_checkpoint", "restore_model", "restore_optimizer",
    "save_checkpoint", "strict_mode",
    "CONFUSION_FILE", "FINAL_CHECKPOINT", "METRICS_FILE", "EpochMetrics",
    "EvalReport", "TrainResult", "evaluate", "evaluate_split", "predict_split",
    "train",
    "LatencyStats", "benchmark_latency", "complexity_report", "count_params",
    "estimate_flops",
    "MODEL_TOL", "OP_TOL", "mini_arch", "run_model_gradcheck", "run_op_gradchecks",
    "DEFAULT_DATA_SEED", "AblationRow", "ensure_datasets", "run_ablation_suite",
    "temporal_config",
]

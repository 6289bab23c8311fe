"""Training, inference, metrics, benchmark, and sweep orchestration."""

from .benchmark import BenchmarkScores, SyntheticBenchmark, build_benchmark, run_benchmark
from .config import StageConfig
from .infer import (
    InferenceResult,
    class_references,
    correlation_map,
    infer,
    save_heatmap_csv,
    save_heatmap_pgm,
)
from .metrics import average_precision, ensemble_scores, evaluate_map
from .sweep import run_sweep
from .train import train_stage1, train_stage2

__all__ = [
    "StageConfig",
    "train_stage1",
    "train_stage2",
    "infer",
    "InferenceResult",
    "class_references",
    "correlation_map",
    "save_heatmap_pgm",
    "save_heatmap_csv",
    "average_precision",
    "evaluate_map",
    "ensemble_scores",
    "run_sweep",
    "SyntheticBenchmark",
    "build_benchmark",
    "BenchmarkScores",
    "run_benchmark",
]

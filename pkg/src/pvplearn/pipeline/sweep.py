"""Cartesian hyperparameter sweeps with per-point fault isolation.

A sweep takes a base configuration, a grid of overrides (top-level
config fields or loss fields via the "loss." prefix), and an evaluation
callable. Every grid point gets one CSV row; a point that raises is
recorded with its error and the sweep continues. Points are independent,
so they can run in a process pool; record order is the deterministic
lexicographic grid order either way.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable

from ..errors import ParameterError
from .config import StageConfig

__all__ = ["run_sweep"]


def _evaluate_point(
    base: StageConfig, overrides: dict, evaluate: Callable[[StageConfig], float]
) -> dict:
    # module-level so a process pool can pickle it
    record = dict(overrides)
    try:
        cfg = base.replace(**overrides)
        record["map"] = float(evaluate(cfg))
        record["status"] = "ok"
        record["error"] = ""
    except Exception as exc:  # keep sweeping past broken points
        record["map"] = ""
        record["status"] = "error"
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def run_sweep(
    base: StageConfig,
    grid: dict[str, list],
    evaluate: Callable[[StageConfig], float],
    out_csv=None,
    jobs: int = 1,
) -> list[dict]:
    """Evaluate every point of the grid; returns one record per point.

    Records carry the override values, "map" (float or empty), "status"
    ("ok" or "error"), and "error" (message or empty). With jobs > 1 the
    points run in a process pool, which requires evaluate to be
    picklable (a module-level function or a partial of one).
    """
    if not grid:
        raise ParameterError("sweep grid is empty")
    if jobs < 1:
        raise ParameterError(f"jobs must be positive, got {jobs}")
    keys = sorted(grid)
    for key, values in grid.items():
        if not isinstance(values, (list, tuple)) or not values:
            raise ParameterError(f"grid entry {key!r} must be a non-empty list")
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    if jobs == 1:
        records = [_evaluate_point(base, overrides, evaluate) for overrides in points]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(
                pool.map(
                    _evaluate_point,
                    itertools.repeat(base),
                    points,
                    itertools.repeat(evaluate),
                )
            )
    if out_csv is not None:
        columns = keys + ["map", "status", "error"]
        with open(Path(out_csv), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            writer.writerows(records)
    return records

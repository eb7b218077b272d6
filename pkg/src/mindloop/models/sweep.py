"""Resumable hyperparameter grid over the CNN architectures.

Each (dataset, n_convs, dense_len) cell trains one network with a seed
derived from (base seed, n, l) and drops a JSON marker in the output
directory; finished markers are skipped on re-run, so an interrupted
sweep resumes where it stopped. Results aggregate into one CSV shaped
like the accuracy-vs-architecture comparison plots, plus a plot-ready
summary.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..dataset import LabeledExample, balance, split
from .cnn import CONV_GRID, DENSE_GRID, TrainConfig
from .train import fit_model

# Average training accuracies from the original human-subject runs of
# this protocol; carried as context in reports, never as test targets.
REFERENCE_BASELINES = {
    "knn_training_accuracy": 0.90,
    "lda_training_accuracy": 0.45,
}

CSV_FIELDS = ("dataset", "n", "l", "seed", "train_acc", "test_acc", "wall_seconds")


@dataclass(frozen=True)
class SweepGrid:
    n_convs: tuple[int, ...] = CONV_GRID
    dense_lens: tuple[int, ...] = DENSE_GRID

    def cells(self, datasets: Sequence[str]) -> list[tuple[str, int, int]]:
        return [(d, n, l) for d in datasets
                for n in self.n_convs for l in self.dense_lens]


def cell_seed(base_seed: int, n: int, l: int) -> int:
    return int(np.random.SeedSequence([base_seed, n, l]).generate_state(1)[0])


def _cell_path(out_dir: Path, dataset: str, n: int, l: int) -> Path:
    return out_dir / "cells" / f"{dataset}_n{n}_l{l}.json"


def _run_cell(dataset_name: str, n: int, l: int, base_seed: int,
              train, test, cfg: TrainConfig) -> dict:
    seed = cell_seed(base_seed, n, l)
    t0 = time.monotonic()
    model, test_eval = fit_model("cnn", train, test, seed=seed,
                                 n_convs=n, dense_len=l,
                                 train_cfg=TrainConfig(
                                     learning_rate=cfg.learning_rate,
                                     momentum=cfg.momentum,
                                     batch_size=cfg.batch_size,
                                     epochs=cfg.epochs, seed=seed))
    return {
        "dataset": dataset_name, "n": n, "l": l, "seed": seed,
        "train_acc": model.meta.training_accuracy,
        "test_acc": test_eval.accuracy if test_eval else None,
        "wall_seconds": time.monotonic() - t0,
    }


def run_sweep(datasets: dict[str, Sequence[LabeledExample]], out_dir: str | os.PathLike,
              grid: SweepGrid | None = None, cfg: TrainConfig | None = None,
              base_seed: int = 0, split_mode: str = "random",
              train_fraction: float = 0.7, jobs: int = 1,
              progress: Callable[[str], None] | None = None) -> list[dict]:
    """Train every grid cell that has no marker yet; return all rows.

    datasets maps a name (e.g. 'full', '10pct', a subject id) to its
    labeled frames. Balancing and the train/test split happen once per
    dataset so every architecture sees identical data.
    """
    grid = grid or SweepGrid()
    cfg = cfg or TrainConfig()
    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)

    prepared = {}
    for name, examples in datasets.items():
        balanced = balance(examples, rng_seed=base_seed)
        prepared[name] = split(balanced, train_fraction=train_fraction,
                               mode=split_mode, rng_seed=base_seed)

    pending = []
    for name, n, l in grid.cells(sorted(datasets)):
        if not _cell_path(out, name, n, l).exists():
            pending.append((name, n, l))

    def finish(name, n, l, row):
        path = _cell_path(out, name, n, l)
        path.write_text(json.dumps(row, indent=1, sort_keys=True))
        if progress:
            progress(f"cell {name} n={n} l={l}: "
                     f"train {row['train_acc']:.3f} test {row['test_acc']:.3f} "
                     f"({row['wall_seconds']:.1f}s)")

    if jobs <= 1:
        for name, n, l in pending:
            train, test = prepared[name]
            finish(name, n, l, _run_cell(name, n, l, base_seed, train, test, cfg))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_run_cell, name, n, l, base_seed,
                            *prepared[name], cfg): (name, n, l)
                for name, n, l in pending}
            for fut, (name, n, l) in futures.items():
                finish(name, n, l, fut.result())

    rows = []
    for name, n, l in grid.cells(sorted(datasets)):
        path = _cell_path(out, name, n, l)
        if path.exists():
            rows.append(json.loads(path.read_text()))
    write_report(rows, out)
    return rows


def write_report(rows: list[dict], out_dir: str | os.PathLike) -> None:
    """sweep.csv plus a plot-ready summary grouped by (dataset, n)."""
    out = Path(out_dir)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_FIELDS})
    summary: dict = {"reference_baselines": REFERENCE_BASELINES, "series": {}}
    for row in rows:
        key = f"{row['dataset']}/n={row['n']}"
        series = summary["series"].setdefault(
            key, {"dense_lens": [], "test_acc": [], "train_acc": []})
        series["dense_lens"].append(row["l"])
        series["test_acc"].append(row["test_acc"])
        series["train_acc"].append(row["train_acc"])
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))

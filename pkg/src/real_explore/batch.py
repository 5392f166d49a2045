"""Seeded batches: run each seed independently, aggregate over the runs that finished."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .config import MissionConfig
from .mission import MissionLogs, MissionReport, Outcome, run_any

SUMMARY_COLUMNS = ("seed", "outcome", "t_exp", "coverage", "rmse", "path_len", "lc_count")
METRICS = ("t_exp", "coverage", "rmse", "path_len", "lc_count")

Runner = Callable[[MissionConfig], tuple[MissionReport, MissionLogs]]


@dataclass
class BatchRun:
    seed: int
    outcome: str  # Complete, Stuck, Crash or Error
    report: MissionReport | None = None
    error: str = ""

    @property
    def failed(self) -> bool:
        return self.outcome != Outcome.COMPLETE.value

    def row(self) -> dict[str, str]:
        if self.report is not None:
            return self.report.summary_row()
        return {"seed": str(self.seed), "outcome": self.outcome, "t_exp": "inf", "coverage": "nan",
                "rmse": "nan", "path_len": "nan", "lc_count": "0"}


@dataclass
class BatchSummary:
    runs: list[BatchRun]
    stats: dict[str, tuple[float, float]] = field(default_factory=dict)  # metric -> (mean, std)
    failures: dict[str, int] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(self.failures.values())

    def metric(self, name: str) -> list[float]:
        return [float(getattr(r.report, name)) for r in self.runs if r.report is not None]

    def text(self) -> str:
        lines = [f"runs: {len(self.runs)}  complete: {len(self.runs) - self.n_failed}"]
        for k, n in sorted(self.failures.items()):
            lines.append(f"failed ({k}): {n}")
        for name in METRICS:
            if name in self.stats:
                mean, std = self.stats[name]
                lines.append(f"{name}: {mean:.3f} +/- {std:.3f}")
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in self.runs:
                w.writerow(r.row())


def parse_seeds(text: str) -> list[int]:
    """``1..10`` (inclusive), ``3,5,8`` or a mix like ``1..3,7``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("no seeds given")
    return out


def summarize(runs: Iterable[BatchRun]) -> BatchSummary:
    runs = sorted(runs, key=lambda r: r.seed)
    failures: dict[str, int] = {}
    for r in runs:
        if r.failed:
            failures[r.outcome] = failures.get(r.outcome, 0) + 1
    ok = [r.report for r in runs if not r.failed]
    stats: dict[str, tuple[float, float]] = {}
    if ok:
        for name in METRICS:
            v = np.array([float(getattr(rep, name)) for rep in ok])
            stats[name] = (float(v.mean()), float(v.std()))
    return BatchSummary(runs, stats, failures)


def batch(cfg: MissionConfig, seeds: Iterable[int], runner: Runner | None = None) -> BatchSummary:
    """Run every seed; a run that raises counts as an ``Error`` failure and the batch goes on."""
    runner = runner or (lambda c: run_any(c))
    runs = []
    for seed in sorted(set(seeds)):
        try:
            report, _ = runner(cfg.replace(seed=seed))
        except Exception as exc:  # a broken run is a data point, not a reason to stop
            runs.append(BatchRun(seed, "Error", None, f"{type(exc).__name__}: {exc}"))
            continue
        runs.append(BatchRun(seed, report.outcome.value, report))
    return summarize(runs)


def median(values: Iterable[float]) -> float:
    v = list(values)
    return float(np.median(v)) if v else math.nan

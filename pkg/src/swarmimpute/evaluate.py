"""Per-value error rows, summaries, the mean-imputation yardstick and CSV output."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyReport, RowSetMismatch

VALUE_HEADER = ["sample", "feature", "actual", "estimate", "epsilon", "squared_error"]
TIMING_HEADER = ["sample", "seconds"]
COMPARISON_HEADER = ["method", "rows", "mean_epsilon", "mean_squared_error",
                     "mean_seconds", "median_seconds", "best_epsilon", "best_squared_error",
                     "best_seconds"]


@dataclass(frozen=True)
class ValueRow:
    sample: int
    feature: int
    actual: float
    estimate: float
    epsilon: float
    squared_error: float


@dataclass
class ImputationReport:
    rows: list
    per_sample_times: list = field(default_factory=list)   # (sample, seconds)
    method: str = ""
    tolerance: float | None = None
    per_sample_objectives: list = field(default_factory=list)  # (sample, objective)
    per_sample_evaluations: list = field(default_factory=list)  # (sample, evaluations)

    def keys(self) -> set:
        return {(r.sample, r.feature) for r in self.rows}

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class Summary:
    method: str
    rows: int
    mean_epsilon: float
    mean_squared_error: float
    mean_seconds: float
    median_seconds: float
    mean_objective: float
    mean_evaluations: float


def value_metrics(actual: float, estimate: float) -> tuple[float, float]:
    eps = abs(float(actual) - float(estimate))
    return eps, eps * eps


def aggregate(report: ImputationReport) -> Summary:
    if not report.rows:
        raise EmptyReport(f"report {report.method!r} has no rows")
    eps = np.array([r.epsilon for r in report.rows])
    sq = np.array([r.squared_error for r in report.rows])
    secs = np.array([s for _, s in report.per_sample_times], dtype=np.float64)
    objs = np.array([o for _, o in report.per_sample_objectives], dtype=np.float64)
    evals = np.array([e for _, e in report.per_sample_evaluations], dtype=np.float64)

    def mean(a):
        return float(a.mean()) if a.size else float("nan")

    return Summary(
        method=report.method,
        rows=len(report.rows),
        mean_epsilon=float(eps.mean()),
        mean_squared_error=float(sq.mean()),
        mean_seconds=mean(secs),
        median_seconds=float(np.median(secs)) if secs.size else float("nan"),
        mean_objective=mean(objs),
        mean_evaluations=mean(evals),
    )


def mean_imputation_baseline(train: np.ndarray, masked) -> ImputationReport:
    """Fill every missing entry with its feature's training-set mean."""
    train = np.atleast_2d(train)
    if train.shape[1] != masked.width:
        raise DimensionMismatch(f"training width {train.shape[1]}, masked width {masked.width}")
    means = train.mean(axis=0)
    rows = []
    for i, j in zip(*np.nonzero(masked.mask)):
        eps, sq = value_metrics(masked.data[i, j], means[j])
        rows.append(ValueRow(int(i), int(j), float(masked.data[i, j]), float(means[j]), eps, sq))
    return ImputationReport(rows, method="mean")


@dataclass(frozen=True)
class Comparison:
    summaries: list
    winners: dict  # metric -> methods attaining the minimum

    def is_tie(self, metric: str) -> bool:
        return len(self.winners[metric]) == len(self.summaries)


def compare(reports) -> Comparison:
    """Side-by-side summaries; each metric lists every method attaining the minimum.

    Summaries are sorted by method name so the result does not depend on
    the order the reports were passed in.
    """
    reports = list(reports)
    if not reports:
        raise EmptyReport("nothing to compare")
    keys = reports[0].keys()
    for rep in reports[1:]:
        if rep.keys() != keys:
            raise RowSetMismatch(f"{rep.method!r} covers different entries than {reports[0].method!r}")
    summaries = sorted((aggregate(r) for r in reports), key=lambda s: s.method)
    winners = {}
    for metric in ("mean_epsilon", "mean_squared_error", "mean_seconds"):
        values = [getattr(s, metric) for s in summaries]
        finite = [v for v in values if np.isfinite(v)]
        best = min(finite) if finite else None
        winners[metric] = [s.method for s, v in zip(summaries, values) if best is not None and v == best]
    return Comparison(summaries, winners)


# -- CSV -----------------------------------------------------------------------

def write_values_csv(report: ImputationReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(VALUE_HEADER)
        for r in report.rows:
            w.writerow([r.sample, r.feature, repr(r.actual), repr(r.estimate),
                        repr(r.epsilon), repr(r.squared_error)])


def read_values_csv(path, method: str = "") -> ImputationReport:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = [ValueRow(int(d["sample"]), int(d["feature"]), float(d["actual"]), float(d["estimate"]),
                         float(d["epsilon"]), float(d["squared_error"])) for d in reader]
    return ImputationReport(rows, method=method or Path(path).stem)


def write_timing_csv(report: ImputationReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        for sample, seconds in report.per_sample_times:
            w.writerow([sample, f"{seconds:.6f}"])


def read_timing_csv(path) -> list:
    with open(path, newline="") as f:
        return [(int(d["sample"]), float(d["seconds"])) for d in csv.DictReader(f)]


def write_objectives_csv(report: ImputationReport, path) -> None:
    evals = dict(report.per_sample_evaluations)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sample", "objective", "evaluations"])
        for sample, obj in report.per_sample_objectives:
            w.writerow([sample, repr(float(obj)), evals.get(sample, "")])


def write_comparison_csv(comparison: Comparison, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COMPARISON_HEADER)
        for s in comparison.summaries:
            w.writerow([s.method, s.rows, repr(s.mean_epsilon), repr(s.mean_squared_error),
                        repr(s.mean_seconds), repr(s.median_seconds),
                        int(s.method in comparison.winners["mean_epsilon"]),
                        int(s.method in comparison.winners["mean_squared_error"]),
                        int(s.method in comparison.winners["mean_seconds"])])

"""Estimate missing entries by minimizing a network's reconstruction error.

For one record the unknown entries form the search space of a firefly
swarm. A candidate is merged with the observed entries and scored by the
mean squared difference between the merged record and its reconstruction,
taken over all components. Ground truth never reaches the objective:
tasks are built from observed values only.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dataset import MaskedDataset
from .deepnet import Network, reconstruct
from .errors import DimensionMismatch, LengthMismatch
from .evaluate import ImputationReport, ValueRow, value_metrics
from .firefly import FireflyConfig, optimize

MIN_POPULATION = 5


@dataclass(frozen=True)
class ImputationTask:
    sample_index: int
    observed: np.ndarray         # full-width row; entries at missing_indices are ignored
    missing_indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.missing_indices)
        if idx.size == 0:
            raise ValueError("a task needs at least one missing index")
        if np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.observed.size:
            raise ValueError("missing_indices must be strictly increasing and inside the record")

    @classmethod
    def from_masked(cls, masked: MaskedDataset, i: int) -> "ImputationTask":
        observed = masked.observed(i)
        missing = masked.missing_indices(i)
        observed[missing] = 0.0
        return cls(i, observed, missing)


@dataclass(frozen=True)
class ImputationOutcome:
    sample_index: int
    missing_indices: np.ndarray
    estimates: np.ndarray
    final_objective: float
    evaluations: int
    elapsed: float
    stop_reason: str


def merge_candidate(observed, missing_indices, candidate) -> np.ndarray:
    """Fill ``missing_indices`` of the observed record from ``candidate``.

    A 2-D ``candidate`` yields one merged record per row.
    """
    candidate = np.asarray(candidate, dtype=np.float64)
    missing_indices = np.asarray(missing_indices)
    if candidate.shape[-1] != missing_indices.size:
        raise LengthMismatch(f"{candidate.shape[-1]} candidate values for {missing_indices.size} missing entries")
    observed = np.asarray(observed, dtype=np.float64)
    if candidate.ndim == 1:
        full = observed.copy()
        full[missing_indices] = candidate
        return full
    full = np.repeat(observed[None, :], candidate.shape[0], axis=0)
    full[:, missing_indices] = candidate
    return full


def reconstruction_objective(net: Network, observed, missing_indices):
    """Batched cost: candidate rows -> per-row reconstruction MSE."""
    observed = np.array(observed, dtype=np.float64)
    missing_indices = np.array(missing_indices)
    if observed.size != net.input_width:
        raise DimensionMismatch(f"record width {observed.size}, network expects {net.input_width}")
    observed.setflags(write=False)

    def cost(candidates):
        full = merge_candidate(observed, missing_indices, np.atleast_2d(candidates))
        return np.mean((full - reconstruct(net, full)) ** 2, axis=1)

    return cost


def population_for(missing_count: int) -> int:
    return max(MIN_POPULATION, missing_count)


def impute_sample(net: Network, task: ImputationTask, config: FireflyConfig,
                  population: int | None = None) -> ImputationOutcome:
    """Run the swarm over the task's missing entries in [0, 1].

    The population defaults to the number of missing entries (at least
    ``MIN_POPULATION``); the wall time covers the search only.
    """
    dim = task.missing_indices.size
    pop = population if population is not None else population_for(dim)
    cfg = replace(config, population_size=pop, lower=0.0, upper=1.0)
    objective = reconstruction_objective(net, task.observed, task.missing_indices)
    start = time.perf_counter()
    result = optimize(objective, dim, cfg)
    elapsed = time.perf_counter() - start
    return ImputationOutcome(task.sample_index, task.missing_indices, result.best_position,
                             result.best_cost, result.evaluations, elapsed, result.stop_reason)


def impute_dataset(net: Network, masked: MaskedDataset, config: FireflyConfig,
                   jobs: int = 1, method: str = "deep_ae+fa", population: int | None = None,
                   progress=None) -> ImputationReport:
    """Impute every record that has missing entries.

    Record ``i`` uses firefly seed ``config.seed + i``. With ``jobs > 1``
    records run on a thread pool; rows are assembled in record order
    either way.
    """
    if masked.width != net.input_width:
        raise DimensionMismatch(f"masked width {masked.width}, network expects {net.input_width}")
    tasks = [ImputationTask.from_masked(masked, i) for i in range(masked.count) if masked.mask[i].any()]

    def run(task):
        cfg = replace(config, seed=config.seed + task.sample_index)
        outcome = impute_sample(net, task, cfg, population)
        if progress is not None:
            progress(outcome)
        return outcome

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = [run(task) for task in tasks]
    return report_from_outcomes(masked, outcomes, method, config.tolerance)


def report_from_outcomes(masked: MaskedDataset, outcomes, method: str, tolerance=None) -> ImputationReport:
    rows, times, objectives, evaluations = [], [], [], []
    for out in outcomes:
        truth = masked.data[out.sample_index, out.missing_indices]
        for feature, actual, estimate in zip(out.missing_indices, truth, out.estimates):
            eps, sq = value_metrics(actual, estimate)
            rows.append(ValueRow(out.sample_index, int(feature), float(actual), float(estimate), eps, sq))
        times.append((out.sample_index, out.elapsed))
        objectives.append((out.sample_index, out.final_objective))
        evaluations.append((out.sample_index, out.evaluations))
    return ImputationReport(rows, times, method, tolerance, objectives, evaluations)

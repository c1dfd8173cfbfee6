"""Firefly algorithm for box-constrained minimization of a black-box cost.

Brightness is the negated cost. Each iteration takes a snapshot of the
swarm; every firefly then moves toward each firefly that was brighter in
the snapshot, in order of decreasing brightness:

    x_i <- x_i + beta0 * exp(-gamma * r**2) * (x_j - x_i) + alpha_t * eps

with ``r`` the Euclidean distance between the moving firefly's current
position and ``x_j``, and ``eps`` a standard Gaussian vector scaled by the
box width. Fireflies with no brighter neighbour take a plain random step
and keep it only if it does not make them worse, so the swarm always
holds the best point seen (elitism) and the trace never increases.

The randomization scale decays geometrically,
``alpha_t = alpha * alpha_final_ratio ** (t / iterations)``; a ratio of 1
keeps it constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ObjectiveNonFinite

TOLERANCE = "tolerance"
MAX_ITERATIONS = "max_iterations"
MAX_EVALUATIONS = "max_evaluations"

# final/initial randomization ratio of the reference FA implementation
DEFAULT_ALPHA_FINAL_RATIO = 1e-4 / 0.9


@dataclass(frozen=True)
class FireflyConfig:
    population_size: int = 20
    iterations: int = 1000
    alpha: float = 0.25
    beta0: float = 0.2
    gamma: float = 1.0
    lower: float | np.ndarray = 0.0
    upper: float | np.ndarray = 1.0
    tolerance: float | None = None
    max_evaluations: int | None = None
    seed: int = 0
    alpha_final_ratio: float = DEFAULT_ALPHA_FINAL_RATIO

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.alpha < 0 or self.beta0 < 0 or self.gamma < 0:
            raise ValueError("alpha, beta0 and gamma must be non-negative")
        if not 0 < self.alpha_final_ratio <= 1:
            raise ValueError("alpha_final_ratio must lie in (0, 1]")
        if np.any(np.asarray(self.lower) >= np.asarray(self.upper)):
            raise ValueError("lower bound must be below upper bound")
        if self.max_evaluations is not None and self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")

    def bounds(self, dimension: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (dimension,))
        hi = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (dimension,))
        return lo, hi

    def alpha_at(self, t: int) -> float:
        if self.iterations == 0:
            return self.alpha
        return self.alpha * self.alpha_final_ratio ** (t / self.iterations)


@dataclass
class Firefly:
    position: np.ndarray
    cost: float


@dataclass(frozen=True)
class OptimizationResult:
    best_position: np.ndarray
    best_cost: float
    evaluations: int
    iterations_run: int
    stop_reason: str
    trace: np.ndarray = field(repr=False)


def attractiveness(beta0: float, gamma: float, r) -> float:
    return beta0 * np.exp(-gamma * np.square(r))


def pairwise_distance(xi, xj) -> float:
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    if xi.shape != xj.shape:
        raise DimensionMismatch(f"positions of shape {xi.shape} and {xj.shape}")
    return float(np.linalg.norm(xi - xj))


def _attract(x: np.ndarray, target: np.ndarray, alpha: float, config: FireflyConfig,
             width: np.ndarray, rng) -> np.ndarray:
    """Move each row of ``x`` toward ``target`` (unclamped)."""
    diff = target - x
    beta = attractiveness(config.beta0, config.gamma, np.sqrt(np.einsum("ij,ij->i", diff, diff)))
    noise = rng.standard_normal(x.shape)
    return x + beta[:, None] * diff + alpha * width * noise


def move_firefly(xi: Firefly, xj: Firefly, config: FireflyConfig, rng, alpha: float | None = None) -> np.ndarray:
    """New position of ``xi`` after one move toward the brighter ``xj``."""
    alpha = config.alpha if alpha is None else alpha
    xi_pos = np.asarray(xi.position, dtype=np.float64)
    lo, hi = config.bounds(xi_pos.size)
    moved = _attract(xi_pos[None, :], np.asarray(xj.position, dtype=np.float64), alpha, config, hi - lo, rng)
    return np.clip(moved[0], lo, hi)


def as_batch_objective(objective):
    """Adapt a one-position cost function to the batched interface."""
    def batched(positions):
        return np.array([objective(p) for p in positions], dtype=np.float64)
    return batched


def optimize(objective, dimension: int, config: FireflyConfig, vectorized: bool = True) -> OptimizationResult:
    """Minimize ``objective`` over the box given by ``config``.

    ``objective`` maps a ``(k, dimension)`` array of positions to ``k``
    costs; pass ``vectorized=False`` for a function of one position.
    Stops on the first of: best cost <= tolerance, evaluation budget
    spent, iterations exhausted.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if not vectorized:
        objective = as_batch_objective(objective)
    lo, hi = config.bounds(dimension)
    width = hi - lo
    pop = config.population_size
    budget = config.max_evaluations
    rng = np.random.default_rng(config.seed)
    evaluations = 0

    def evaluate(x):
        nonlocal evaluations
        costs = np.asarray(objective(x), dtype=np.float64).reshape(-1)
        if costs.shape != (x.shape[0],):
            raise DimensionMismatch(f"objective returned {costs.shape[0]} costs for {x.shape[0]} positions")
        if not np.all(np.isfinite(costs)):
            raise ObjectiveNonFinite("objective returned a non-finite cost")
        evaluations += x.shape[0]
        return costs

    x = rng.uniform(lo, hi, (pop, dimension))
    n_first = pop if budget is None else min(pop, budget)
    x = x[:n_first]  # a budget below one pass shrinks the swarm
    cost = evaluate(x)
    trace = [cost.min()]

    def stop_reason():
        if config.tolerance is not None and cost.min() <= config.tolerance:
            return TOLERANCE
        if budget is not None and evaluations >= budget:
            return MAX_EVALUATIONS
        return None

    reason = stop_reason()
    t = 0
    while reason is None and t < config.iterations:
        alpha = config.alpha_at(t)
        order = np.argsort(cost, kind="stable")
        x, cost = x[order], cost[order]
        x_old, cost_old = x.copy(), cost.copy()
        # with the swarm sorted, the fireflies dimmer than j form the tail x[starts[j]:]
        starts = np.searchsorted(cost_old, cost_old, side="right")
        moves = x.shape[0] - starts
        noise = rng.standard_normal((int(moves.sum()), dimension))
        noise *= alpha * width
        pos = 0
        for j, s in enumerate(starts):
            if s == x.shape[0]:
                continue
            tail = x[s:]
            diff = x_old[j] - tail
            beta = attractiveness(config.beta0, config.gamma, np.sqrt(np.einsum("ij,ij->i", diff, diff)))
            diff *= beta[:, None]
            tail += diff
            tail += noise[pos:pos + tail.shape[0]]
            pos += tail.shape[0]
        walkers = np.arange(x.shape[0]) < starts[0]  # tied for brightest: nobody to follow
        x[walkers] += alpha * width * rng.standard_normal((int(walkers.sum()), dimension))
        np.clip(x, lo, hi, out=x)

        n_eval = x.shape[0] if budget is None else min(x.shape[0], budget - evaluations)
        cost = cost_old.copy()
        cost[:n_eval] = evaluate(x[:n_eval])
        x[n_eval:] = x_old[n_eval:]  # unevaluated moves are discarded
        worse = walkers & (cost > cost_old)
        x[worse] = x_old[worse]
        cost[worse] = cost_old[worse]

        t += 1
        trace.append(cost.min())
        reason = stop_reason()

    best = int(np.argmin(cost))
    return OptimizationResult(
        best_position=x[best].copy(),
        best_cost=float(cost[best]),
        evaluations=evaluations,
        iterations_run=t,
        stop_reason=reason or MAX_ITERATIONS,
        trace=np.asarray(trace),
    )

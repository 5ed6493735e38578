"""Whale Optimization Algorithm for box-constrained minimization.

Each iteration first scores every whale, updates the global best, then moves
the whales in index order: shrinking encirclement of the best (``|A| < 1``),
a jump relative to a random whale (``|A| >= 1``), or a logarithmic spiral
around the best, each chosen from ``p`` and ``A``. Positions are clamped to the
box after every move and the control coefficient ``a`` decays linearly from
2 to 0 over ``max_iters`` iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

Fitness = Callable[[np.ndarray], float]


class WoaConfigError(ValueError):
    pass


@dataclass
class WoaConfig:
    num_whales: int = 30
    max_iters: int = 50
    lower_bound: float = -5.0
    upper_bound: float = 5.0
    spiral_b: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_whales < 2:
            raise WoaConfigError("num_whales must be at least 2")
        if self.max_iters < 0:
            raise WoaConfigError("max_iters must be non-negative")
        if not self.lower_bound < self.upper_bound:
            raise WoaConfigError("lower_bound must be below upper_bound")


@dataclass
class WoaPopulation:
    positions: np.ndarray
    best_position: np.ndarray
    best_score: float = np.inf
    a: float = 2.0
    iteration: int = 0
    seed_clamped: bool = False
    rng: np.random.Generator = field(default=None, repr=False)


def decay(iteration: int, max_iters: int) -> float:
    """Coefficient ``a`` after ``iteration`` completed steps (2 at the start, 0 at the end)."""
    if max_iters == 0:
        return 0.0
    return 2.0 - 2.0 * iteration / max_iters


def init_population(config: WoaConfig, dim: int, seed_solution=None) -> WoaPopulation:
    """Uniform random whales in the box; whale 0 is set to ``seed_solution`` if given."""
    if dim < 1:
        raise WoaConfigError("dim must be at least 1")
    rng = np.random.default_rng(config.seed)
    lo, hi = config.lower_bound, config.upper_bound
    positions = rng.uniform(lo, hi, size=(config.num_whales, dim))
    clamped = False
    if seed_solution is not None:
        seed = np.asarray(seed_solution, dtype=float).reshape(-1)
        if seed.shape != (dim,):
            raise WoaConfigError(f"seed solution has shape {seed.shape}, expected ({dim},)")
        inside = np.clip(seed, lo, hi)
        if not np.array_equal(inside, seed):
            clamped = True
            logger.warning(
                "seed solution leaves the box [%g, %g] in %d coordinate(s); clamped",
                lo,
                hi,
                int(np.sum(inside != seed)),
            )
        positions[0] = inside
    return WoaPopulation(
        positions=positions,
        best_position=positions[0].copy(),
        a=decay(0, config.max_iters),
        seed_clamped=clamped,
        rng=rng,
    )


def _score(fitness: Fitness, x: np.ndarray) -> float:
    value = float(fitness(x))
    return value if np.isfinite(value) else np.inf


def step(pop: WoaPopulation, fitness: Fitness, config: WoaConfig) -> WoaPopulation:
    """Advance ``pop`` by one iteration in place and return it."""
    rng = pop.rng
    scores = np.array([_score(fitness, x) for x in pop.positions])
    for i, s in enumerate(scores):
        if s < pop.best_score:
            pop.best_score = s
            pop.best_position = pop.positions[i].copy()

    best = pop.best_position
    snapshot = pop.positions.copy()
    a = pop.a
    n = config.num_whales
    for i in range(n):
        x = pop.positions[i]
        r1, r2, p = rng.random(3)
        A = 2.0 * a * r1 - a
        C = 2.0 * r2
        if p < 0.5:
            if abs(A) < 1:
                new = best - A * np.abs(C * best - x)
            else:
                x_rand = snapshot[rng.integers(n)]
                new = x_rand - A * np.abs(C * x_rand - x)
        else:
            l = rng.uniform(-1.0, 1.0)
            new = np.abs(best - x) * np.exp(config.spiral_b * l) * np.cos(2.0 * np.pi * l) + best
        pop.positions[i] = np.clip(new, config.lower_bound, config.upper_bound)

    pop.iteration += 1
    pop.a = decay(pop.iteration, config.max_iters)
    return pop


def optimize(fitness: Fitness, dim: int, config: WoaConfig, seed_solution=None):
    """Run ``max_iters`` iterations.

    Returns ``(best_position, best_score, trace)`` where ``trace[t]`` is the
    best score known after iteration ``t``. With ``max_iters = 0`` nothing is
    evaluated and the score stays ``inf``.
    """
    pop = init_population(config, dim, seed_solution)
    trace = []
    for _ in range(config.max_iters):
        step(pop, fitness, config)
        trace.append(pop.best_score)
    return pop.best_position.copy(), pop.best_score, np.array(trace)


def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * x))


def shifted_sphere(center) -> Fitness:
    center = np.asarray(center, dtype=float)

    def f(x):
        d = np.asarray(x, dtype=float) - center
        return float(d @ d)

    return f

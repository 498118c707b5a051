"""Elitist genetic algorithm for bounded design and controller search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from ..errors import DesignError

POPULATION = 16
TOURNAMENT = 3
CROSSOVER = 0.5
SIGMA = 0.1


@dataclass
class Evaluation:
    index: int
    generation: int
    genes: np.ndarray
    J: float
    best_J: float


class OptimizationResult(NamedTuple):
    theta: np.ndarray
    phi: np.ndarray
    J: float
    history: list


def genetic_search(objective: Callable, bounds, seed=0, budget=800, discrete: Optional[dict] = None):
    """Minimize ``objective(genes)`` over a box.

    Args:
        objective: Maps a gene vector to a float (``inf`` for infeasible).
        bounds: (lower, upper) per gene.
        seed: RNG seed; the search is deterministic for a fixed seed.
        budget: Total objective evaluations (>= population size).
        discrete: Gene index -> allowed values; such genes are initialized
            and mutated by resampling from their values.

    Returns:
        (best genes, best J, history of :class:`Evaluation`).
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if np.any(bounds[:, 0] > bounds[:, 1]):
        raise DesignError("lower bound above upper bound")
    if budget < POPULATION:
        raise DesignError(f"budget {budget} is smaller than the population size {POPULATION}")
    discrete = {int(k): np.asarray(v, dtype=float) for k, v in (discrete or {}).items()}
    rng = np.random.default_rng(seed)
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    n = len(bounds)
    p_mut = 1.0 / max(n, 1)
    history = []
    best = (math.inf, None)

    def evaluate(pop, generation):
        nonlocal best
        scores = np.empty(len(pop))
        for k, genes in enumerate(pop):
            J = float(objective(genes.copy()))
            if math.isnan(J):
                J = math.inf
            scores[k] = J
            if J < best[0] or best[1] is None:
                best = (J, genes.copy())
            history.append(Evaluation(len(history), generation, genes.copy(), J, best[0]))
        return scores

    pop = lo + rng.random((POPULATION, n)) * width
    for k, vals in discrete.items():
        pop[:, k] = rng.choice(vals, POPULATION)
    scores = evaluate(pop, 0)
    generation = 0
    while len(history) < budget:
        generation += 1
        n_children = min(POPULATION - 1, budget - len(history))
        elite = pop[np.argmin(scores)].copy()

        def pick():
            idx = rng.integers(0, POPULATION, TOURNAMENT)
            return pop[idx[np.argmin(scores[idx])]]

        children = np.empty((n_children, n))
        for c in range(n_children):
            a, b = pick(), pick()
            mask = rng.random(n) < CROSSOVER
            child = np.where(mask, a, b)
            mutate = rng.random(n) < p_mut
            noise = rng.normal(0.0, SIGMA, n) * width
            child = np.where(mutate, np.clip(child + noise, lo, hi), child)
            for k, vals in discrete.items():
                if mutate[k]:
                    child[k] = rng.choice(vals)
            children[c] = child
        child_scores = evaluate(children, generation)
        # elitism: the best individual always survives into the next population
        pop = np.vstack([elite[None, :], children])
        scores = np.concatenate([[scores.min()], child_scores])
        if len(pop) < POPULATION:
            break
    return best[1], best[0], history


def optimize(problem, seed=0, budget=800, bounds=None) -> OptimizationResult:
    """Run the genetic search on a :class:`DesignProblem` or a plain objective.

    Args:
        problem: DesignProblem, or a callable of the gene vector (then
            ``bounds`` is required and every gene is reported as theta).
    """
    if callable(problem) and not hasattr(problem, "theta"):
        if bounds is None:
            raise DesignError("bounds are required for a plain objective")
        genes, J, hist = genetic_search(problem, bounds, seed, budget)
        return OptimizationResult(np.asarray(genes), np.zeros(0), J, hist)
    from .design import evaluate_objective

    n_theta = len(problem.theta)
    discrete = {k: v.values for k, v in enumerate(problem.theta) if v.discrete}

    def objective(genes):
        return evaluate_objective(problem, genes[:n_theta], genes[n_theta:])

    genes, J, hist = genetic_search(objective, problem.bounds, seed, budget, discrete)
    return OptimizationResult(genes[:n_theta], genes[n_theta:], J, hist)

"""Random-sampling baseline and a brute-force exact solver for tiny instances."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .evaluate import evaluate_routes, objective_values
from .ga import sample_chromosomes
from .model import Instance, Objective, Route, Solution, decode

DEFAULT_EVALUATIONS = 20_000
SAMPLE_BATCH = 512
MAX_EXACT_LINES = 7
MAX_EXACT_MACHINES = 3


@dataclass(frozen=True)
class Budget:
    seconds: Optional[float] = None
    evaluations: Optional[int] = None

    def __post_init__(self):
        if (self.seconds is None) == (self.evaluations is None):
            raise ValueError("budget needs exactly one of seconds or evaluations")
        if self.seconds is not None and not self.seconds > 0:
            raise ValueError("wall-clock budget must be > 0 seconds")
        if self.evaluations is not None and self.evaluations < 1:
            raise ValueError("evaluation budget must be at least 1")

    @classmethod
    def wall_clock(cls, seconds: float) -> "Budget":
        return cls(seconds=seconds)

    @classmethod
    def evals(cls, count: int) -> "Budget":
        return cls(evaluations=count)


def random_search(inst: Instance, objective, budget: Budget, rng: np.random.Generator) -> Solution:
    """Best of uniformly sampled chromosomes.

    Samples are always drawn in full batches of ``SAMPLE_BATCH`` so that a
    run with a larger evaluation budget sees the same leading samples as a
    smaller one under the same seed.
    """
    objective = Objective.parse(objective)
    L, M = inst.n_lines, inst.n_machines
    best_val, best = np.inf, None
    done = 0
    t_end = None if budget.seconds is None else time.perf_counter() + budget.seconds
    while True:
        if budget.evaluations is not None and done >= budget.evaluations:
            break
        if t_end is not None and done and time.perf_counter() >= t_end:
            break
        batch = sample_chromosomes(rng, SAMPLE_BATCH, L, M)
        take = SAMPLE_BATCH
        if budget.evaluations is not None:
            take = min(SAMPLE_BATCH, budget.evaluations - done)
            batch = batch.take(np.arange(take))
        vals = objective_values(*batch, inst, objective)
        idx = int(np.argmin(vals))
        if vals[idx] < best_val:
            best_val, best = float(vals[idx]), batch.chromosome(idx)
        done += take
    return evaluate_routes(decode(best, inst), inst, objective)


# --- exact oracle --------------------------------------------------------------


def _route_key(route: Route) -> tuple:
    return tuple(route)


def _best_routes_per_subset(inst: Instance, rtol: float) -> dict[tuple[int, ...], tuple[float, Route]]:
    """Minimum idle distance over every ordering and entrance choice of every subset.

    Orderings are visited lexicographically and entrances by a binary counter
    (first position most significant); among equal minima the lexicographically
    smallest route wins.
    """
    d = inst.tensor
    L = inst.n_lines
    best: dict[tuple[int, ...], tuple[float, Route]] = {(): (0.0, ())}
    for size in range(1, L + 1):
        perms_idx = np.array(list(itertools.permutations(range(size))), dtype=np.int64)
        ents = np.array(list(itertools.product((0, 1), repeat=size)), dtype=np.int64)
        P, E = len(perms_idx), len(ents)
        for subset in itertools.combinations(range(1, L + 1), size):
            nodes = np.asarray(subset)[perms_idx]  # (P, size)
            n = np.repeat(nodes, E, axis=0)  # (P*E, size)
            e = np.tile(ents, (P, 1))
            cost = d[0, n[:, 0], 0, e[:, 0]] + d[n[:, -1], 0, 1 - e[:, -1], 0]
            for i in range(1, size):
                cost = cost + d[n[:, i - 1], n[:, i], 1 - e[:, i - 1], e[:, i]]
            lo = cost.min()
            ties = np.nonzero(cost <= lo + rtol * max(1.0, abs(lo)))[0]
            routes = [tuple(zip(n[t].tolist(), e[t].tolist())) for t in ties]
            best[subset] = (float(lo), min(routes))
    return best


def exact_solve(inst: Instance, objective, rtol: float = 1e-9) -> tuple[Solution, float]:
    """Global optimum by exhaustive enumeration (L <= 7, M <= 3).

    Every machine's objective contribution grows with its idle distance once
    its set of lines is fixed, so each subset is solved exhaustively once and
    the assignments of lines to machines (base-M counter, machine 1 the most
    significant digit) are then enumerated in full. Ties within ``rtol`` go to
    the lexicographically smallest route list.
    """
    objective = Objective.parse(objective)
    L, M = inst.n_lines, inst.n_machines
    if L > MAX_EXACT_LINES or M > MAX_EXACT_MACHINES:
        raise ValueError(
            f"exact solver is limited to L <= {MAX_EXACT_LINES} lines and M <= {MAX_EXACT_MACHINES} "
            f"machines (got L={L}, M={M})"
        )
    per_subset = _best_routes_per_subset(inst, rtol)
    lengths = inst.line_lengths()
    machines = inst.machines

    best_val, best_routes = np.inf, None
    for assign in itertools.product(range(M), repeat=L):
        groups = [tuple(i + 1 for i in range(L) if assign[i] == k) for k in range(M)]
        s = [per_subset[g][0] for g in groups]
        sw = [float(sum(lengths[list(g)])) for g in groups]
        if objective is Objective.TOTAL_IDLE_DISTANCE:
            val = sum(s)
        else:
            t = [s[k] / m.v_v + sw[k] / m.v_w for k, m in enumerate(machines)]
            if objective is Objective.MAKESPAN:
                val = max(t)
            else:
                val = sum(s[k] / m.v_v * m.c_v + sw[k] / m.v_w * m.c_w for k, m in enumerate(machines))
        routes = tuple(per_subset[g][1] for g in groups)
        tol = rtol * max(1.0, abs(best_val)) if np.isfinite(best_val) else 0.0
        if val < best_val - tol or (abs(val - best_val) <= tol and routes < best_routes):
            best_val, best_routes = val, routes
    solution = evaluate_routes(best_routes, inst, objective)
    return solution, solution.value(objective)

"""Objective evaluation: idle distance, work distance, time, fuel, fitness.

The scalar functions operate on one route and are the reference path.
:func:`evaluate_population` is the vectorized path used inside the search
loops; both must agree to floating-point rounding.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import (
    Instance,
    Machine,
    MachineMetrics,
    Objective,
    Route,
    Solution,
    WorkingLine,
    complement,
)

FITNESS_EPS = 1e-9


def idle_distance(route: Sequence[tuple[int, int]], tensor: np.ndarray) -> float:
    """Depot leg + exit-to-entrance legs + return leg for one machine."""
    if not route:
        return 0.0
    for _, e in route:
        if e not in (0, 1):
            raise ValueError(f"entrance must be 0 or 1, got {e!r}")
    first_line, first_ent = route[0]
    total = float(tensor[0, first_line, 0, first_ent])
    for (prev, pe), (cur, ce) in zip(route, route[1:]):
        total += float(tensor[prev, cur, complement(pe), ce])
    last_line, last_ent = route[-1]
    total += float(tensor[last_line, 0, complement(last_ent), 0])
    return total


def work_distance(route: Sequence[tuple[int, int]], lines: Sequence[WorkingLine]) -> float:
    total = 0.0
    for line_id, _ in route:
        if not 1 <= line_id <= len(lines):
            raise ValueError(f"unknown line id {line_id}")
        total += lines[line_id - 1].length_m
    return total


def time_and_fuel(m: Machine, s_k: float, s_k_w: float) -> tuple[float, float]:
    if m.v_w <= 0 or m.v_v <= 0:
        raise ValueError(f"machine {m.id} has a non-positive speed")
    idle_t = s_k / m.v_v
    work_t = s_k_w / m.v_w
    return idle_t + work_t, idle_t * m.c_v + work_t * m.c_w


def aggregate(metrics: Sequence[MachineMetrics]) -> tuple[float, float, float]:
    """Fleet totals: summed idle distance, makespan, summed fuel."""
    if not metrics:
        raise ValueError("aggregate needs at least one machine")
    s_P = sum(m.s_k for m in metrics)
    t_P = max(m.t_k for m in metrics)
    c_P = sum(m.c_k_o for m in metrics)
    return s_P, t_P, c_P


def fitness(value):
    """Reciprocal of an objective value, guarded near zero. Accepts scalars or arrays."""
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("objective values must be non-negative")
    out = 1.0 / np.maximum(arr, FITNESS_EPS)
    return float(out) if out.ndim == 0 else out


def machine_metrics(route: Route, m: Machine, inst: Instance) -> MachineMetrics:
    s_k = idle_distance(route, inst.tensor)
    s_w = work_distance(route, inst.lines)
    t_k, c_k = time_and_fuel(m, s_k, s_w)
    return MachineMetrics(s_k, s_w, t_k, c_k)


def evaluate_routes(routes: Sequence[Route], inst: Instance, objective: Objective | str = "s") -> Solution:
    if len(routes) != inst.n_machines:
        raise ValueError(f"expected {inst.n_machines} routes, got {len(routes)}")
    seen = sorted(l for r in routes for l, _ in r)
    if seen != list(range(1, inst.n_lines + 1)):
        raise ValueError("routes must cover every working line exactly once")
    routes = tuple(tuple((int(l), int(e)) for l, e in r) for r in routes)
    per = tuple(machine_metrics(r, m, inst) for r, m in zip(routes, inst.machines))
    s_P, t_P, c_P = aggregate(per)
    return Solution(routes, per, s_P, t_P, c_P, Objective.parse(objective))


# --- vectorized path ----------------------------------------------------------


def segment_index(cuts: np.ndarray, n_lines: int) -> np.ndarray:
    """Machine index of every tour position; ``cuts`` has shape (N, M-1)."""
    pos = np.arange(n_lines)
    return (cuts[:, None, :] <= pos[None, :, None]).sum(axis=-1)


def evaluate_population(lines: np.ndarray, ents: np.ndarray, cuts: np.ndarray, inst: Instance):
    """Per-machine metrics for a batch of chromosomes.

    ``lines`` and ``ents`` have shape (N, L); ``cuts`` has shape (N, M-1).
    Returns arrays ``s_k, s_w, t_k, c_k`` of shape (N, M).
    """
    n, L = lines.shape
    M = inst.n_machines
    d = inst.tensor
    seg = segment_index(cuts, L)
    first = np.ones((n, L), dtype=bool)
    first[:, 1:] = seg[:, 1:] != seg[:, :-1]
    last = np.ones((n, L), dtype=bool)
    last[:, :-1] = seg[:, :-1] != seg[:, 1:]
    exits = 1 - ents

    leg_in = d[0, lines, 0, ents]
    if L > 1:
        inner = d[lines[:, :-1], lines[:, 1:], exits[:, :-1], ents[:, 1:]]
        leg_in[:, 1:] = np.where(first[:, 1:], leg_in[:, 1:], inner)
    leg_out = np.where(last, d[lines, 0, exits, 0], 0.0)

    flat = (np.arange(n)[:, None] * M + seg).ravel()
    s_k = np.bincount(flat, weights=(leg_in + leg_out).ravel(), minlength=n * M).reshape(n, M)
    lengths = inst.line_lengths()
    s_w = np.bincount(flat, weights=lengths[lines].ravel(), minlength=n * M).reshape(n, M)

    vw = np.array([m.v_w for m in inst.machines])
    vv = np.array([m.v_v for m in inst.machines])
    cw = np.array([m.c_w for m in inst.machines])
    cv = np.array([m.c_v for m in inst.machines])
    idle_t = s_k / vv
    work_t = s_w / vw
    return s_k, s_w, idle_t + work_t, idle_t * cv + work_t * cw


def objective_values(lines, ents, cuts, inst: Instance, objective: Objective | str) -> np.ndarray:
    obj = Objective.parse(objective)
    s_k, _, t_k, c_k = evaluate_population(lines, ents, cuts, inst)
    if obj is Objective.TOTAL_IDLE_DISTANCE:
        return s_k.sum(axis=1)
    if obj is Objective.MAKESPAN:
        return t_k.max(axis=1)
    return c_k.sum(axis=1)

"""Shared builders and independent reference implementations for the tests.

The reference functions here are deliberately written in plain Python over
lists so that they share no code with the vectorized library paths.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from edvrp.model import Chromosome, Depot, Field, Instance, Machine, WorkingLine

M1 = Machine(1, 2.5, 4.5, 0.008, 0.006)
M2 = Machine(2, 3.0, 5.0, 0.007, 0.005)
M3 = Machine(3, 3.0, 5.5, 0.008, 0.006)
M4 = Machine(4, 3.0, 6.0, 0.010, 0.008)
TABLE2 = (M1, M2, M3, M4)


def symmetric_tensor(rng: np.random.Generator, n_lines: int, scale: float = 100.0) -> np.ndarray:
    """Random points for every entrance; Euclidean distances are symmetric and metric."""
    pts = rng.uniform(0, scale, size=(n_lines + 1, 2, 2))
    pts[0, 1] = pts[0, 0]
    diff = pts[:, None, :, None, :] - pts[None, :, None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    d[np.arange(n_lines + 1), np.arange(n_lines + 1)] = 0.0
    return d


def random_instance(
    seed: int, n_lines: int, n_machines: int, n_fields: int = 1, machines=None
) -> Instance:
    rng = np.random.default_rng(seed)
    d = symmetric_tensor(rng, n_lines)
    fields = [int(f) for f in rng.integers(0, n_fields, size=n_lines)]
    counter: dict[int, int] = {}
    lines = []
    for i, f in enumerate(fields, start=1):
        lines.append(WorkingLine(i, float(rng.uniform(50, 150)), f, counter.get(f, 0)))
        counter[f] = counter.get(f, 0) + 1
    if machines is None:
        machines = [
            Machine(k + 1, float(rng.uniform(2.5, 3)), float(rng.uniform(4.5, 6)),
                    float(rng.uniform(0.007, 0.01)), float(rng.uniform(0.005, 0.008)))
            for k in range(n_machines)
        ]
    return Instance(Depot((0.0, 0.0)), lines, machines, d)


def random_chromosome(rng: np.random.Generator, n_lines: int, n_machines: int) -> Chromosome:
    perm = [int(x) + 1 for x in rng.permutation(n_lines)]
    ents = [int(x) for x in rng.integers(0, 2, n_lines)]
    cuts = sorted(int(x) for x in rng.integers(0, n_lines + 1, n_machines - 1))
    return Chromosome(tuple(zip(perm, ents)), tuple(cuts))


def segments_of(c: Chromosome) -> list[list[tuple[int, int]]]:
    bounds = [0, *c.cuts, len(c.tour)]
    return [list(c.tour[bounds[k]:bounds[k + 1]]) for k in range(len(bounds) - 1)]


def from_segments(segs) -> Chromosome:
    tour, cuts = [], []
    for k, s in enumerate(segs):
        if k:
            cuts.append(len(tour))
        tour.extend(s)
    return Chromosome(tuple(tour), tuple(cuts))


# --- reference formulas -------------------------------------------------------


def ref_idle(route, d) -> float:
    if not route:
        return 0.0
    legs = [d[0][route[0][0]][0][route[0][1]]]
    for (p, pe), (c, ce) in zip(route, route[1:]):
        legs.append(d[p][c][1 - pe][ce])
    legs.append(d[route[-1][0]][0][1 - route[-1][1]][0])
    return float(sum(legs))


def ref_objective(segs, inst: Instance, objective: str) -> float:
    s, t, c = [], [], []
    for route, m in zip(segs, inst.machines):
        sk = ref_idle(route, inst.tensor)
        sw = sum(inst.lines[l - 1].length_m for l, _ in route)
        s.append(sk)
        t.append(sk / m.v_v + sw / m.v_w)
        c.append(sk / m.v_v * m.c_v + sw / m.v_w * m.c_w)
    return {"s": sum(s), "t": max(t), "c": sum(c)}[objective]


def brute_force_optimum(inst: Instance, objective: str) -> float:
    """Minimum over every chromosome: permutations x entrances x cut vectors."""
    L, M = inst.n_lines, inst.n_machines
    best = math.inf
    cut_vectors = list(itertools.combinations_with_replacement(range(L + 1), M - 1))
    for perm in itertools.permutations(range(1, L + 1)):
        for ents in itertools.product((0, 1), repeat=L):
            tour = tuple(zip(perm, ents))
            for cuts in cut_vectors:
                segs = segments_of(Chromosome(tour, cuts))
                best = min(best, ref_objective(segs, inst, objective))
    return best


def ref_greedy(c: Chromosome, d) -> Chromosome:
    segs = []
    for route in segments_of(c):
        out = []
        prev = None
        for line, _ in route:
            if prev is None:
                costs = [d[0][line][0][b] for b in (0, 1)]
            else:
                costs = [d[prev[0]][line][1 - prev[1]][b] for b in (0, 1)]
            e = 1 if costs[1] < costs[0] else 0
            out.append((line, e))
            prev = (line, e)
        segs.append(out)
    return from_segments(segs)


def ref_intragroup_sort(c: Chromosome, k: int, inst: Instance) -> Chromosome:
    segs = segments_of(c)
    seg = segs[k]
    by_field: dict[int, list[int]] = {}
    for pos, (line, _) in enumerate(seg):
        by_field.setdefault(inst.lines[line - 1].field_id, []).append(pos)
    new = list(seg)
    for positions in by_field.values():
        members = sorted((seg[p][0] for p in positions), key=lambda l: inst.lines[l - 1].ordinal)
        anchor = seg[positions[0]][1]
        for r, (p, line) in enumerate(zip(positions, members)):
            new[p] = (line, anchor if r % 2 == 0 else 1 - anchor)
    segs[k] = new
    return from_segments(segs)


def ref_crossover_child(keep: Chromosome, other: Chromosome, k: int) -> Chromosome:
    bounds = [0, *keep.cuts, len(keep.tour)]
    s, e = bounds[k], bounds[k + 1]
    kept = {line for line, _ in keep.tour[s:e]}
    filler = iter(t for t in other.tour if t[0] not in kept)
    tour = [keep.tour[p] if s <= p < e else next(filler) for p in range(len(keep.tour))]
    return Chromosome(tuple(tour), other.cuts)


def floyd_warshall(n_vertices: int, edges, weights) -> np.ndarray:
    dist = np.full((n_vertices, n_vertices), np.inf)
    np.fill_diagonal(dist, 0.0)
    for (u, v), w in zip(edges, weights):
        dist[u, v] = min(dist[u, v], w)
        dist[v, u] = min(dist[v, u], w)
    for k in range(n_vertices):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return dist


def point_on_segment(p, a, b, tol=1e-6) -> bool:
    p, a, b = (np.asarray(x, float) for x in (p, a, b))
    ab = b - a
    t = float(np.dot(p - a, ab) / np.dot(ab, ab))
    if t < -1e-12 or t > 1 + 1e-12:
        return False
    return float(np.linalg.norm(p - (a + t * ab))) <= tol


def on_polygon_boundary(p, polygon, tol=1e-6) -> bool:
    n = len(polygon)
    return any(point_on_segment(p, polygon[i], polygon[(i + 1) % n], tol) for i in range(n))


def tiny_field_instance() -> Instance:
    """Three lines in one field, two machines, with geometry."""
    lines = [
        WorkingLine(1, 10.0, 0, 0, (0.0, 0.0), (0.0, 10.0)),
        WorkingLine(2, 10.0, 0, 1, (5.0, 0.0), (5.0, 10.0)),
        WorkingLine(3, 10.0, 0, 2, (10.0, 0.0), (10.0, 10.0)),
    ]
    rng = np.random.default_rng(0)
    d = symmetric_tensor(rng, 3)
    return Instance(Depot((0.0, -5.0)), lines, [M1, M2], d, [Field(0, ((0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)))])

"""Random farm generation and hand-built counterexample farms.

A farm is a set of non-overlapping convex quadrilateral fields filled with
parallel working lines. Idle travel happens on a navigation graph made of the
field boundaries (headlands, split at every entrance) and straight access
roads from the depot; working lines themselves are never traversal edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .model import Depot, Field, Instance, Machine, WorkingLine

FIELD_COUNTS = (1, 2, 3, 4, 6)
MACHINE_COUNTS = (3, 5, 7)
CORNER_DECIMALS = 3
ENTRANCE_DECIMALS = 6
ROAD_GAP_M = 30.0


@dataclass(frozen=True)
class GenParams:
    n_fields: int = 3
    n_machines: int = 5
    target_nodes: int = 40
    line_spacing_m: float = 10.0
    field_size_range_m: tuple[float, float] = (120.0, 320.0)
    v_w_range: tuple[float, float] = (2.5, 3.0)
    v_v_range: tuple[float, float] = (4.5, 6.0)
    c_w_range: tuple[float, float] = (0.007, 0.01)
    c_v_range: tuple[float, float] = (0.005, 0.008)
    seed: int = 0

    def __post_init__(self):
        if self.n_fields < 1:
            raise ValueError("n_fields must be at least 1")
        if self.n_machines < 1:
            raise ValueError("n_machines must be at least 1")
        if self.target_nodes < self.n_fields + 1:
            raise ValueError("target_nodes must leave at least one line per field plus the depot")
        if not self.line_spacing_m > 0:
            raise ValueError("line_spacing_m must be > 0")
        lo, hi = self.field_size_range_m
        if not 0 < lo <= hi:
            raise ValueError("field_size_range_m must satisfy 0 < min <= max")
        for name in ("v_w_range", "v_v_range", "c_w_range", "c_v_range"):
            a, b = getattr(self, name)
            if a > b or a < 0 or (name.startswith("v") and a <= 0):
                raise ValueError(f"{name} is not a valid range")

    def to_dict(self) -> dict:
        return {
            "n_fields": self.n_fields,
            "n_machines": self.n_machines,
            "target_nodes": self.target_nodes,
            "line_spacing_m": self.line_spacing_m,
            "field_size_range_m": list(self.field_size_range_m),
            "v_w_range": list(self.v_w_range),
            "v_v_range": list(self.v_v_range),
            "c_w_range": list(self.c_w_range),
            "c_v_range": list(self.c_v_range),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenParams":
        kw = dict(d)
        for key in ("field_size_range_m", "v_w_range", "v_v_range", "c_w_range", "c_v_range"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


@dataclass
class NavGraph:
    vertices: np.ndarray  # (V, 2)
    edges: list[tuple[int, int]] = field(default_factory=list)

    def weights(self) -> list[float]:
        v = self.vertices
        return [math.hypot(*(v[a] - v[b])) for a, b in self.edges]

    def matrix(self) -> csr_matrix:
        n = len(self.vertices)
        if not self.edges:
            return csr_matrix((n, n))
        a, b = np.array(self.edges).T
        w = np.array(self.weights())
        # duplicate edges collapse to their minimum
        rows = np.concatenate([a, b])
        cols = np.concatenate([b, a])
        vals = np.concatenate([w, w])
        order = np.lexsort((vals, cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        keep = np.ones(len(rows), dtype=bool)
        keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        return csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))

    def shortest_path(self, u: int, v: int) -> list[int]:
        _, pred = dijkstra(self.matrix(), directed=False, indices=u, return_predecessors=True)
        path = [v]
        while path[-1] != u:
            nxt = pred[path[-1]]
            if nxt < 0:
                raise ValueError(f"vertex {v} unreachable from {u}")
            path.append(int(nxt))
        return path[::-1]


class _VertexIndex:
    """Vertex registry that merges coincident points."""

    def __init__(self):
        self.points: list[tuple[float, float]] = []
        self._ids: dict[tuple[float, float], int] = {}

    def add(self, p) -> int:
        key = (float(p[0]), float(p[1]))
        if key not in self._ids:
            self._ids[key] = len(self.points)
            self.points.append(key)
        return self._ids[key]


def shortest_distances(graph: NavGraph, entrances: Sequence[tuple[int, int]]) -> np.ndarray:
    """Fill the 4-way distance tensor from graph shortest paths.

    ``entrances[i]`` gives the two vertex ids of node i (node 0 is the depot,
    both ids equal). The result is exactly reversal-symmetric.
    """
    ent = np.asarray(entrances, dtype=np.int64)
    n = len(ent)
    sources = np.unique(ent)
    dist = dijkstra(graph.matrix(), directed=False, indices=sources)
    row_of = {int(s): r for r, s in enumerate(sources)}
    sub = dist[:, sources]
    sub = np.minimum(sub, sub.T)
    if not np.all(np.isfinite(sub)):
        bad = sorted({int(sources[r]) for r in np.nonzero(~np.isfinite(sub))[0]})
        raise ValueError(f"navigation graph is disconnected at entrance vertices {bad}")
    rows = np.array([[row_of[int(v)] for v in pair] for pair in ent])
    d = sub[rows[:, None, :, None], rows[None, :, None, :]]
    d[np.arange(n), np.arange(n)] = 0.0
    return d


def _rotate(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return points @ np.array([[c, s], [-s, c]])


def _on_segment_param(p, a, b) -> float:
    ab = np.asarray(b, float) - np.asarray(a, float)
    return float(np.dot(np.asarray(p, float) - a, ab) / np.dot(ab, ab))


def build_navgraph(
    depot: tuple[float, float],
    polygons: Sequence[Sequence[tuple[float, float]]],
    line_points: Sequence[tuple[tuple[float, float], tuple[float, float], int]],
) -> tuple[NavGraph, list[tuple[int, int]]]:
    """Headland graph for a farm.

    ``line_points`` lists (entrance0, entrance1, field index) per line. Each
    field boundary edge is split at every entrance and at its midpoint; the
    depot gets one straight road to the nearest edge midpoint of every field.
    Returns the graph and per-node entrance vertex ids (node 0 = depot).
    """
    vx = _VertexIndex()
    d_id = vx.add(depot)
    edges: list[tuple[int, int]] = []
    entrance_ids: list[tuple[int, int]] = [(d_id, d_id)]
    per_field_points: list[list] = [[] for _ in polygons]
    for e0, e1, f in line_points:
        entrance_ids.append((vx.add(e0), vx.add(e1)))
        per_field_points[f].extend([e0, e1])

    depot_xy = np.asarray(depot, float)
    for f, poly in enumerate(polygons):
        corners = [tuple(map(float, p)) for p in poly]
        mids = []
        for k in range(len(corners)):
            a, b = np.asarray(corners[k]), np.asarray(corners[(k + 1) % len(corners)])
            mid = tuple(np.round((a + b) / 2, CORNER_DECIMALS))
            mids.append(mid)
            on_edge = [(0.0, corners[k]), (1.0, corners[(k + 1) % len(corners)]), (0.5, mid)]
            for p in per_field_points[f]:
                t = _on_segment_param(p, a, b)
                foot = a + t * (b - a)
                if -1e-9 <= t <= 1 + 1e-9 and math.hypot(*(np.asarray(p) - foot)) <= 1e-6:
                    on_edge.append((t, p))
            on_edge.sort(key=lambda tp: tp[0])
            ids = [vx.add(p) for _, p in on_edge]
            edges.extend((u, v) for u, v in zip(ids, ids[1:]) if u != v)
        nearest = min(mids, key=lambda m: (math.hypot(*(np.asarray(m) - depot_xy)), m))
        edges.append((d_id, vx.add(nearest)))
    return NavGraph(np.array(vx.points), edges), entrance_ids


def _sample_range(rng, rng_pair):
    lo, hi = rng_pair
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def generate(params: GenParams) -> Instance:
    """Random farm for ``params``; identical params give an identical instance."""
    rng = np.random.default_rng(params.seed)
    n_lines = params.target_nodes - 1
    counts = np.full(params.n_fields, n_lines // params.n_fields)
    counts[rng.permutation(params.n_fields)[: n_lines % params.n_fields]] += 1

    spacing = params.line_spacing_m
    lo, hi = params.field_size_range_m
    shapes = []
    for f in range(params.n_fields):
        width = counts[f] * spacing
        h_left, h_right = (_sample_range(rng, (lo, hi)) for _ in range(2))
        angle = float(rng.uniform(0.0, 2 * math.pi))
        shapes.append((width, h_left, h_right, angle))

    radius = max(0.5 * math.hypot(w, max(hl, hr)) for w, hl, hr, _ in shapes)
    cell = 2 * radius + ROAD_GAP_M
    cols = math.ceil(math.sqrt(params.n_fields))

    polygons = []
    line_points = []
    for f, (width, hl, hr, angle) in enumerate(shapes):
        row, col = divmod(f, cols)
        local_r = 0.5 * math.hypot(width, max(hl, hr))
        slack = max(0.0, cell / 2 - local_r - ROAD_GAP_M / 2)
        center = np.array([(col + 0.5) * cell, (row + 0.5) * cell]) + rng.uniform(-slack, slack, 2)
        quad = np.array([[0.0, 0.0], [width, 0.0], [width, hr], [0.0, hl]])
        offset = np.array([width / 2, max(hl, hr) / 2])
        corners = np.round(_rotate(quad - offset, angle) + center, CORNER_DECIMALS)
        polygons.append([tuple(p) for p in corners.tolist()])
        # entrances sit on the rounded bottom (corner 0 -> 1) and top (corner 3 -> 2) edges
        for k in range(counts[f]):
            t = (k + 0.5) / counts[f]
            e0 = corners[0] + t * (corners[1] - corners[0])
            e1 = corners[3] + t * (corners[2] - corners[3])
            line_points.append((tuple(np.round(e0, ENTRANCE_DECIMALS)), tuple(np.round(e1, ENTRANCE_DECIMALS)), f))

    grid_w = cols * cell
    depot = (round(float(rng.uniform(0.0, grid_w)), CORNER_DECIMALS), round(-ROAD_GAP_M, CORNER_DECIMALS))

    machines = [
        Machine(
            k + 1,
            round(_sample_range(rng, params.v_w_range), 3),
            round(_sample_range(rng, params.v_v_range), 3),
            round(_sample_range(rng, params.c_w_range), 4),
            round(_sample_range(rng, params.c_v_range), 4),
        )
        for k in range(params.n_machines)
    ]
    return assemble(depot, polygons, line_points, machines)


def assemble(depot, polygons, line_points, machines, graph: Optional[NavGraph] = None, entrance_ids=None) -> Instance:
    """Build an instance from geometry, computing the tensor on the headland graph
    (or on ``graph`` when one is supplied)."""
    if graph is None:
        graph, entrance_ids = build_navgraph(depot, polygons, line_points)
    tensor = shortest_distances(graph, entrance_ids)
    lines = []
    ordinal_counter: dict[int, int] = {}
    for i, (e0, e1, f) in enumerate(line_points, start=1):
        ordinal = ordinal_counter.get(f, 0)
        ordinal_counter[f] = ordinal + 1
        length = math.hypot(e1[0] - e0[0], e1[1] - e0[1])
        lines.append(WorkingLine(i, length, f, ordinal, tuple(map(float, e0)), tuple(map(float, e1))))
    fields = [Field(f, tuple(tuple(map(float, p)) for p in poly)) for f, poly in enumerate(polygons)]
    return Instance(Depot(tuple(map(float, depot))), lines, machines, tensor, fields)


def navgraph_for(inst: Instance) -> tuple[NavGraph, list[tuple[int, int]]]:
    line_points = [(ln.entrance0_xy, ln.entrance1_xy, ln.field_id) for ln in inst.lines]
    return build_navgraph(inst.depot.xy, [f.polygon for f in inst.fields], line_points)


def free_space_graph(depot, line_points) -> tuple[NavGraph, list[tuple[int, int]]]:
    """Complete graph over the depot and all entrances, minus each line's own edge."""
    vx = _VertexIndex()
    d_id = vx.add(depot)
    ids = [(d_id, d_id)] + [(vx.add(e0), vx.add(e1)) for e0, e1, _ in line_points]
    own = {tuple(sorted(p)) for p in ids[1:]}
    n = len(vx.points)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in own]
    return NavGraph(np.array(vx.points), edges), ids


# --- counterexample farms ------------------------------------------------------

FIXTURE_MACHINE = Machine(1, 2.5, 4.5, 0.008, 0.006)
# depot rise above the leftmost line top, in units of line spacing; puts the
# switch between the sorted sweep and the best unsorted order at cos(theta) = 1/3
FIG2_DEPOT_RISE = 0.7007766339184848


def fixture_fig2(theta: float, spacing: float = 10.0) -> Instance:
    """Three parallel 2*spacing long lines whose tops climb along a staircase.

    ``theta`` is the tilt of the headland (the hop from one line's top to the
    next) away from the perpendicular of the lines: cos(theta) = 1 gives a
    rectangular field, small cos(theta) a steep staircase. Entrance 0 is the
    top of each line; the depot sits one spacing left of and above line 1.
    Travel is unconstrained except along the lines themselves.
    """
    if not 0 < theta < math.pi / 2:
        raise ValueError("theta must lie strictly between 0 and pi/2")
    h = 2.0 * spacing
    hop = spacing * np.array([math.cos(theta), math.sin(theta)])
    tops = [k * hop for k in range(3)]
    line_points = [(tuple(t), tuple(t - np.array([0.0, h])), 0) for t in tops]
    depot = (-spacing, FIG2_DEPOT_RISE * spacing)
    margin = 0.5 * hop
    polygon = [
        tuple(tops[0] - margin - np.array([0.0, h])),
        tuple(tops[2] + margin - np.array([0.0, h])),
        tuple(tops[2] + margin),
        tuple(tops[0] - margin),
    ]
    graph, ids = free_space_graph(depot, line_points)
    return assemble(depot, [polygon], line_points, [FIXTURE_MACHINE], graph, ids)


def fixture_fig3(spacing: float = 10.0, length: float = 100.0) -> Instance:
    """Three side-by-side lines with the depot off the bottom-right corner.

    Entrance 0 is the bottom of each line. The cheapest first leg reaches the
    bottom of line 1, which leaves the machine at the far top corner after the
    third line; starting from the top of line 1 is shorter overall.
    """
    line_points = [((k * spacing, 0.0), (k * spacing, length), 0) for k in range(3)]
    depot = (3 * spacing, -spacing)
    polygon = [(-spacing / 2, 0.0), (2.5 * spacing, 0.0), (2.5 * spacing, length), (-spacing / 2, length)]
    graph, ids = free_space_graph(depot, line_points)
    return assemble(depot, [polygon], line_points, [FIXTURE_MACHINE], graph, ids)


def fixture_case_study() -> Instance:
    """Three-field farm with the four-machine fleet of the case study."""
    fleet = [
        Machine(1, 2.5, 4.5, 0.008, 0.006),
        Machine(2, 3.0, 5.0, 0.007, 0.005),
        Machine(3, 3.0, 5.5, 0.008, 0.006),
        Machine(4, 3.0, 6.0, 0.010, 0.008),
    ]
    base = generate(GenParams(n_fields=3, n_machines=4, target_nodes=40, seed=20240613))
    return Instance(base.depot, base.lines, fleet, base.tensor, base.fields)


# --- suites -----------------------------------------------------------------------


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed from a parent seed and integer keys."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def suite_manifest(
    n_cases: int,
    seed: int,
    fields: Sequence[int] = FIELD_COUNTS,
    machines: Sequence[int] = MACHINE_COUNTS,
    **overrides,
) -> list[dict]:
    """Cases cycle through every (fields, machines) combination in order."""
    combos = [(f, m) for f in fields for m in machines]
    out = []
    for i in range(n_cases):
        f, m = combos[i % len(combos)]
        case_seed = derive_seed(seed, i)
        params = GenParams(n_fields=f, n_machines=m, seed=case_seed, **overrides)
        out.append({"case_id": f"case_{i:04d}", "seed": case_seed, "params": params.to_dict()})
    return out

import math

import numpy as np
import pytest

from edvrp.baseline import exact_solve
from edvrp.evaluate import evaluate_routes
from edvrp.ga import mutate_greedy_path
from edvrp.instgen import (
    GenParams,
    NavGraph,
    build_navgraph,
    derive_seed,
    fixture_case_study,
    fixture_fig2,
    fixture_fig3,
    generate,
    navgraph_for,
    shortest_distances,
    suite_manifest,
)
from edvrp.model import dumps, encode, instance_to_dict, triangle_violations, validate_instance
from util import TABLE2, floyd_warshall, on_polygon_boundary


class TestGenParams:
    @pytest.mark.parametrize(
        "kw",
        [
            {"n_fields": 0},
            {"n_machines": 0},
            {"n_fields": 3, "target_nodes": 3},
            {"line_spacing_m": 0.0},
            {"field_size_range_m": (5.0, 1.0)},
            {"v_w_range": (0.0, 1.0)},
            {"c_v_range": (0.2, 0.1)},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            GenParams(**kw)

    def test_roundtrip(self):
        p = GenParams(n_fields=4, seed=9)
        assert GenParams.from_dict(p.to_dict()) == p

    def test_default_envelope(self):
        p = GenParams()
        assert p.v_w_range == (min(m.v_w for m in TABLE2), max(m.v_w for m in TABLE2))
        assert p.v_v_range == (min(m.v_v for m in TABLE2), max(m.v_v for m in TABLE2))
        assert p.c_w_range == (min(m.c_w for m in TABLE2), max(m.c_w for m in TABLE2))
        assert p.c_v_range == (min(m.c_v for m in TABLE2), max(m.c_v for m in TABLE2))


class TestShortestDistances:
    def test_single_edge(self):
        g = NavGraph(np.array([[0.0, 0.0], [7.0, 0.0]]), [(0, 1)])
        d = shortest_distances(g, [(0, 0), (0, 1)])
        assert d[0, 1, 0, 1] == 7.0 and d[1, 0, 1, 0] == 7.0

    def test_triangle_detour(self):
        # far pair joined directly by a 10 m edge and via a midpoint by 3 + 4
        g = NavGraph(np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]), [(0, 1), (1, 2)])
        g_weights = [3.0, 4.0]
        assert g.weights() == g_weights
        dist = floyd_warshall(3, g.edges + [(0, 2)], g_weights + [10.0])
        assert dist[0, 2] == 7.0
        d = shortest_distances(g, [(0, 0), (1, 2)])
        assert d[0, 1, 0, 1] == 7.0

    def test_depot_coincident(self):
        inst = generate(GenParams(n_fields=2, seed=5))
        d = inst.tensor
        assert np.array_equal(d[0, :, 0, :], d[0, :, 1, :])

    def test_disconnected(self):
        g = NavGraph(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]), [(0, 1)])
        with pytest.raises(ValueError, match="disconnected"):
            shortest_distances(g, [(0, 0), (1, 2)])

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_floyd_warshall(self, seed):
        inst = generate(GenParams(n_fields=1 + seed, n_machines=3, target_nodes=12, seed=seed))
        g, ids = navgraph_for(inst)
        dist = floyd_warshall(len(g.vertices), g.edges, g.weights())
        L = inst.n_lines
        for i in range(L + 1):
            for j in range(L + 1):
                if i == j:
                    continue
                for a in range(2):
                    for b in range(2):
                        assert inst.tensor[i, j, a, b] == pytest.approx(dist[ids[i][a], ids[j][b]], rel=1e-12)

    def test_edge_weights_are_euclidean(self):
        inst = generate(GenParams(seed=3))
        g, _ = navgraph_for(inst)
        for (u, v), w in zip(g.edges, g.weights()):
            assert w == pytest.approx(float(np.linalg.norm(g.vertices[u] - g.vertices[v])))

    def test_lines_not_traversable(self):
        inst = generate(GenParams(seed=3))
        g, ids = navgraph_for(inst)
        edges = {tuple(sorted(e)) for e in g.edges}
        for a, b in ids[1:]:
            assert tuple(sorted((a, b))) not in edges

    def test_shortest_path(self):
        g = NavGraph(np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]), [(0, 1), (1, 2)])
        assert g.shortest_path(0, 2) == [0, 1, 2]


class TestGenerate:
    def test_minimal(self):
        inst = generate(GenParams(n_fields=1, target_nodes=2))
        assert inst.n_lines == 1 and len(inst.fields) == 1
        assert validate_instance(inst) == []

    def test_split(self):
        inst = generate(GenParams(n_fields=3, target_nodes=40, seed=1))
        assert inst.n_lines == 39
        counts = np.bincount([ln.field_id for ln in inst.lines])
        assert sorted(counts) == [13, 13, 13]
        assert validate_instance(inst) == []

    def test_uneven_split(self):
        inst = generate(GenParams(n_fields=4, target_nodes=40, seed=1))
        assert sorted(np.bincount([ln.field_id for ln in inst.lines])) == [9, 10, 10, 10]

    def test_deterministic(self):
        a = dumps(instance_to_dict(generate(GenParams(seed=42))))
        b = dumps(instance_to_dict(generate(GenParams(seed=42))))
        c = dumps(instance_to_dict(generate(GenParams(seed=43))))
        assert a == b and a != c

    @pytest.mark.parametrize("n_fields", [1, 2, 3, 4, 6])
    def test_geometry(self, n_fields):
        inst = generate(GenParams(n_fields=n_fields, n_machines=5, seed=n_fields))
        assert validate_instance(inst) == []
        assert triangle_violations(inst.tensor) == []
        polys = {f.id: f.polygon for f in inst.fields}
        for ln in inst.lines:
            assert on_polygon_boundary(ln.entrance0_xy, polys[ln.field_id])
            assert on_polygon_boundary(ln.entrance1_xy, polys[ln.field_id])
            assert ln.length_m == pytest.approx(math.dist(ln.entrance0_xy, ln.entrance1_xy))
        for f in inst.fields:
            assert len(f.polygon) == 4
            assert _convex(f.polygon)
        assert _no_overlap([f.polygon for f in inst.fields])

    def test_parallel_lines_at_spacing(self):
        inst = generate(GenParams(n_fields=1, target_nodes=8, seed=7, line_spacing_m=12.0))
        e0 = np.array([ln.entrance0_xy for ln in sorted(inst.lines, key=lambda l: l.ordinal)])
        gaps = np.linalg.norm(np.diff(e0, axis=0), axis=1)
        assert np.allclose(gaps, 12.0, atol=1e-5)

    def test_machines_in_ranges(self):
        p = GenParams(n_machines=7, seed=4)
        for m in generate(p).machines:
            assert p.v_w_range[0] <= m.v_w <= p.v_w_range[1]
            assert p.v_v_range[0] <= m.v_v <= p.v_v_range[1]
            assert p.c_w_range[0] <= m.c_w <= p.c_w_range[1]
            assert p.c_v_range[0] <= m.c_v <= p.c_v_range[1]

    def test_coordinates_rounded(self):
        data = instance_to_dict(generate(GenParams(seed=8)))
        for f in data["fields"]:
            for x, y in f["polygon"]:
                assert round(x, 3) == x and round(y, 3) == y
        assert round(data["depot"]["x"], 3) == data["depot"]["x"]


def _convex(poly):
    pts = np.asarray(poly)
    signs = []
    for i in range(len(pts)):
        a, b, c = pts[i], pts[(i + 1) % len(pts)], pts[(i + 2) % len(pts)]
        signs.append(np.sign((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])))
    return all(s >= 0 for s in signs) or all(s <= 0 for s in signs)


def _no_overlap(polys):
    # separating axis test for convex polygons
    def axes(p):
        p = np.asarray(p)
        edges = np.roll(p, -1, axis=0) - p
        return np.stack([-edges[:, 1], edges[:, 0]], axis=1)

    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            a, b = np.asarray(polys[i]), np.asarray(polys[j])
            separated = False
            for ax in np.concatenate([axes(a), axes(b)]):
                pa, pb = a @ ax, b @ ax
                if pa.max() < pb.min() or pb.max() < pa.min():
                    separated = True
                    break
            if not separated:
                return False
    return True


class TestFixtures:
    def test_fig2_low_cos(self):
        inst = fixture_fig2(math.acos(0.2))
        assert validate_instance(inst) == []
        sol, opt = exact_solve(inst, "s")
        sorted_sweep = evaluate_routes((((1, 0), (2, 1), (3, 0)),), inst).s_P
        assert [l for l, _ in sol.routes[0]] != [1, 2, 3]
        assert opt < sorted_sweep - 1e-6

    def test_fig2_high_cos(self):
        inst = fixture_fig2(math.acos(0.9))
        sol, opt = exact_solve(inst, "s")
        assert sol.routes == (((1, 0), (2, 1), (3, 0)),)

    @pytest.mark.parametrize("cos_theta,switched", [(0.05, True), (0.3, True), (0.32, True), (0.35, False), (0.5, False), (0.99, False)])
    def test_fig2_threshold(self, cos_theta, switched):
        inst = fixture_fig2(math.acos(cos_theta))
        sol, _ = exact_solve(inst, "s")
        assert ([l for l, _ in sol.routes[0]] != [1, 2, 3]) == switched

    @pytest.mark.parametrize("theta", [0.0, math.pi / 2, -0.3])
    def test_fig2_domain(self, theta):
        with pytest.raises(ValueError):
            fixture_fig2(theta)

    def test_fig3(self):
        inst = fixture_fig3()
        assert validate_instance(inst) == []
        sol, opt = exact_solve(inst, "s")
        greedy = mutate_greedy_path(encode(sol.routes), inst)
        assert [l for l, _ in greedy.tour] == [l for l, _ in sol.routes[0]]
        greedy_s = evaluate_routes(greedy.segments(), inst).s_P
        assert greedy_s > opt + 1e-6

    def test_case_study(self):
        inst = fixture_case_study()
        assert validate_instance(inst) == []
        assert [(m.v_w, m.v_v, m.c_w, m.c_v) for m in inst.machines] == [
            (m.v_w, m.v_v, m.c_w, m.c_v) for m in TABLE2
        ]


class TestSuite:
    def test_derive_seed(self):
        assert derive_seed(1, 2) == derive_seed(1, 2)
        assert derive_seed(1, 2) != derive_seed(1, 3)
        assert derive_seed(1, 2, 0) != derive_seed(1, 2, 1)
        assert 0 <= derive_seed(5) < 2**64

    def test_manifest_cycles_combinations(self):
        cases = suite_manifest(16, 3)
        combos = [(c["params"]["n_fields"], c["params"]["n_machines"]) for c in cases]
        assert len(set(combos[:15])) == 15
        assert combos[15] == combos[0]
        assert len({c["case_id"] for c in cases}) == 16

    def test_build_navgraph_splits_edges(self):
        g, ids = build_navgraph((0.0, -10.0), [[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]],
                                [((5.0, 0.0), (5.0, 10.0), 0)])
        assert ids[1] != ids[0]
        edges = {tuple(sorted(e)) for e in g.edges}
        assert tuple(sorted(ids[1])) not in edges
        d = shortest_distances(g, ids)
        assert d[1, 1, 0, 1] == 0.0
        # road from the depot to the nearest edge midpoint, here the bottom one at (5, 0)
        road = math.hypot(5.0, 10.0)
        assert d[0, 1, 0, 0] == pytest.approx(road)
        assert d[0, 1, 0, 1] == pytest.approx(road + 5.0 + 10.0 + 5.0)

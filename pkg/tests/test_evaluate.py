import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edvrp.evaluate import (
    aggregate,
    evaluate_population,
    evaluate_routes,
    fitness,
    idle_distance,
    machine_metrics,
    objective_values,
    time_and_fuel,
    work_distance,
)
from edvrp.ga import to_batch
from edvrp.model import Machine, MachineMetrics, WorkingLine, decode
from util import M1, random_chromosome, random_instance, ref_objective, segments_of


def hand_tensor():
    d = np.zeros((3, 3, 2, 2))

    def put(i, j, a, b, v):
        d[i, j, a, b] = v
        d[j, i, b, a] = v

    put(0, 1, 0, 0, 10.0)
    put(1, 0, 1, 0, 8.0)
    put(1, 2, 1, 1, 5.0)
    put(2, 0, 0, 0, 7.0)
    return d


class TestIdleDistance:
    def test_empty(self):
        assert idle_distance([], hand_tensor()) == 0.0

    def test_single_line(self):
        assert idle_distance([(1, 0)], hand_tensor()) == pytest.approx(18.0, rel=1e-9)

    def test_two_lines(self):
        assert idle_distance([(1, 0), (2, 1)], hand_tensor()) == pytest.approx(22.0, rel=1e-9)

    def test_bad_entrance(self):
        with pytest.raises(ValueError):
            idle_distance([(1, 2)], hand_tensor())


class TestWorkDistance:
    lines = [WorkingLine(1, 100.0, 0, 0), WorkingLine(2, 80.0, 0, 1), WorkingLine(3, 60.0, 0, 2)]

    def test_empty(self):
        assert work_distance([], self.lines) == 0.0

    def test_single(self):
        assert work_distance([(1, 1)], self.lines) == 100.0

    def test_sum(self):
        assert work_distance([(1, 0), (3, 1)], self.lines) == pytest.approx(160.0, rel=1e-9)

    def test_unknown_line(self):
        with pytest.raises(ValueError):
            work_distance([(4, 0)], self.lines)


class TestTimeAndFuel:
    def test_table2_m1(self):
        t, c = time_and_fuel(M1, 22.0, 100.0)
        assert t == pytest.approx(22 / 4.5 + 100 / 2.5, rel=1e-9)
        assert t == pytest.approx(44.888888888888886, rel=1e-9)
        assert c == pytest.approx((22 / 4.5) * 0.006 + 40 * 0.008, rel=1e-9)
        assert c == pytest.approx(0.34933333333333333, rel=1e-9)

    def test_zero(self):
        assert time_and_fuel(M1, 0.0, 0.0) == (0.0, 0.0)

    def test_zero_rates(self):
        assert time_and_fuel(Machine(1, 2.0, 3.0, 0.0, 0.0), 55.0, 77.0)[1] == 0.0

    def test_zero_speed(self):
        with pytest.raises(ValueError):
            time_and_fuel(Machine(1, 0.0, 3.0, 0.0, 0.0), 1.0, 1.0)


class TestAggregate:
    def test_makespan(self):
        ms = [MachineMetrics(0, 0, 44.9, 0), MachineMetrics(0, 0, 30.0, 0)]
        assert aggregate(ms)[1] == 44.9

    def test_single(self):
        m = MachineMetrics(3.0, 4.0, 5.0, 6.0)
        assert aggregate([m]) == (3.0, 5.0, 6.0)

    def test_sum(self):
        ms = [MachineMetrics(s, 0, 0, 0) for s in (10, 20, 5)]
        assert aggregate(ms)[0] == 35

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestFitness:
    def test_reciprocal(self):
        assert fitness(100) == pytest.approx(0.01)

    def test_guard(self):
        assert fitness(0) == pytest.approx(1e9)

    def test_monotone(self):
        assert fitness(3.0) > fitness(4.0)

    def test_negative(self):
        with pytest.raises(ValueError):
            fitness(-1.0)

    def test_array(self):
        assert np.allclose(fitness(np.array([1.0, 2.0])), [1.0, 0.5])


class TestEvaluateRoutes:
    def test_empty_route_is_zero(self):
        inst = random_instance(2, 3, 2)
        sol = evaluate_routes((((1, 0), (2, 1), (3, 0)), ()), inst, "t")
        assert sol.per_machine[1] == MachineMetrics(0.0, 0.0, 0.0, 0.0)
        assert sol.t_P == sol.per_machine[0].t_k

    def test_coverage(self):
        inst = random_instance(2, 3, 2)
        with pytest.raises(ValueError, match="exactly once"):
            evaluate_routes((((1, 0),), ((2, 1),)), inst)

    def test_self_consistency(self):
        inst = random_instance(5, 6, 3)
        chrom = random_chromosome(np.random.default_rng(0), 6, 3)
        sol = evaluate_routes(decode(chrom, inst), inst, "c")
        for r, m, mm in zip(sol.routes, inst.machines, sol.per_machine):
            assert machine_metrics(r, m, inst) == mm
        assert sol.value() == sol.c_P

    def test_deterministic(self):
        inst = random_instance(5, 6, 3)
        chrom = random_chromosome(np.random.default_rng(0), 6, 3)
        a = evaluate_routes(decode(chrom, inst), inst)
        b = evaluate_routes(decode(chrom, inst), inst)
        assert a == b

    def test_relabeling_invariance(self):
        inst = random_instance(5, 6, 3)
        chrom = random_chromosome(np.random.default_rng(4), 6, 3)
        routes = decode(chrom, inst)
        per = [idle_distance(r, inst.tensor) for r in routes]
        assert [idle_distance(r, inst.tensor) for r in routes[::-1]] == per[::-1]


class TestVectorized:
    @given(st.integers(0, 10_000), st.integers(1, 12), st.integers(1, 6), st.sampled_from("stc"))
    @settings(max_examples=150, deadline=None)
    def test_matches_reference(self, seed, L, M, obj):
        inst = random_instance(seed, L, M, n_fields=2)
        rng = np.random.default_rng(seed)
        chroms = [random_chromosome(rng, L, M) for _ in range(8)]
        vals = objective_values(*to_batch(chroms), inst, obj)
        for c, v in zip(chroms, vals):
            ref = ref_objective(segments_of(c), inst, obj)
            assert v == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_per_machine_matches_scalar(self):
        inst = random_instance(9, 10, 4)
        rng = np.random.default_rng(9)
        chroms = [random_chromosome(rng, 10, 4) for _ in range(20)]
        s_k, s_w, t_k, c_k = evaluate_population(*to_batch(chroms), inst)
        for r, c in enumerate(chroms):
            sol = evaluate_routes(decode(c, inst), inst)
            for k, mm in enumerate(sol.per_machine):
                assert s_k[r, k] == pytest.approx(mm.s_k, rel=1e-12, abs=1e-12)
                assert s_w[r, k] == pytest.approx(mm.s_k_w, rel=1e-12, abs=1e-12)
                assert t_k[r, k] == pytest.approx(mm.t_k, rel=1e-12, abs=1e-12)
                assert c_k[r, k] == pytest.approx(mm.c_k_o, rel=1e-12, abs=1e-12)

    def test_adding_a_line_never_lowers_makespan(self):
        # with a metric tensor the detour through one more line is never shorter
        inst = random_instance(11, 6, 2)
        rng = np.random.default_rng(11)
        for _ in range(50):
            perm = [int(x) + 1 for x in rng.permutation(6)]
            ents = [int(x) for x in rng.integers(0, 2, 6)]
            tour = list(zip(perm, ents))
            cut = int(rng.integers(0, 6))
            r1, r2 = tuple(tour[:cut]), tuple(tour[cut:-1])
            before = max(machine_metrics(r, m, inst).t_k for r, m in zip((r1, r2), inst.machines))
            after = evaluate_routes((r1, r2 + (tour[-1],)), inst).t_P
            assert after >= before - 1e-12

    def test_total_work_constant(self):
        inst = random_instance(13, 15, 5)
        rng = np.random.default_rng(13)
        total = math.fsum(ln.length_m for ln in inst.lines)
        for _ in range(100):
            sol = evaluate_routes(decode(random_chromosome(rng, 15, 5), inst), inst)
            assert sum(m.s_k_w for m in sol.per_machine) == pytest.approx(total, rel=1e-12)

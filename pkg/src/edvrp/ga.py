"""Ordered genetic algorithm over (line, entrance) permutations with cut points.

The population is held as three integer arrays: ``lines`` and ``ents`` of
shape (N, L) and ``cuts`` of shape (N, M-1). Every operator is written once
in vectorized form taking explicit parameters; the ``draw_*`` helpers consume
the random stream and the ``mutate_*`` functions wrap both for a single
:class:`~edvrp.model.Chromosome`.

Random draw order per generation (all from one ``numpy.random.Generator``):

1. roulette wheel: ``random(N)``
2. crossover: ``random(N//2)`` firing mask, then ``random((N//2, M))`` keys
   for each parent side
3. for each enabled mutation operator, in the order local inversion,
   inter-group exchange, inter-group transfer, entrance inversion, intra-group
   sort: ``random(N)`` firing mask, then that operator's parameter draws.
   Disabled operators draw nothing; the greedy path operator draws only its mask.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .evaluate import evaluate_routes, fitness, objective_values, segment_index
from .model import Chromosome, Instance, Objective, Solution, chromosome_violations, decode

VARIANTS = {
    "OGA": (True, True),
    "OGA-greedy": (False, True),
    "OGA-sort": (True, False),
    "GA-no-order": (False, False),
}


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 200
    iterations: int = 200
    p_crossover: float = 0.6
    p_local_inversion: float = 0.5
    p_intergroup_exchange: float = 0.5
    p_intergroup_transfer: float = 0.6
    p_entrance_inversion: float = 0.5
    p_intragroup_sort: float = 0.8
    p_greedy_path: float = 0.8
    enable_sort: bool = True
    enable_greedy: bool = True
    objective: Objective = Objective.TOTAL_IDLE_DISTANCE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective.parse(self.objective))
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        for name in (
            "p_crossover",
            "p_local_inversion",
            "p_intergroup_exchange",
            "p_intergroup_transfer",
            "p_entrance_inversion",
            "p_intragroup_sort",
            "p_greedy_path",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be between 0 and 1, got {p}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @classmethod
    def for_variant(cls, name: str, **kwargs) -> "GaConfig":
        try:
            enable_sort, enable_greedy = VARIANTS[name]
        except KeyError:
            raise ValueError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}") from None
        return cls(enable_sort=enable_sort, enable_greedy=enable_greedy, **kwargs)

    @property
    def variant(self) -> str:
        for name, flags in VARIANTS.items():
            if flags == (self.enable_sort, self.enable_greedy):
                return name
        raise AssertionError("unreachable")


@dataclass
class RunTrace:
    best_objective_per_iteration: list[float]
    final_best: Solution
    wall_time_s: float
    best_chromosome: Optional[Chromosome] = None


class Batch(NamedTuple):
    lines: np.ndarray
    ents: np.ndarray
    cuts: np.ndarray

    def __len__(self):
        return self.lines.shape[0]

    def take(self, idx) -> "Batch":
        return Batch(self.lines[idx], self.ents[idx], self.cuts[idx])

    def where(self, mask: np.ndarray, other: "Batch") -> "Batch":
        """Rows from ``other`` where ``mask`` holds, else rows from self."""
        m = mask[:, None]
        return Batch(
            np.where(m, other.lines, self.lines),
            np.where(m, other.ents, self.ents),
            np.where(m, other.cuts, self.cuts),
        )

    def chromosome(self, row: int) -> Chromosome:
        tour = tuple(zip(self.lines[row].tolist(), self.ents[row].tolist()))
        return Chromosome(tour, tuple(self.cuts[row].tolist()))


def to_batch(chroms: Sequence[Chromosome]) -> Batch:
    lines = np.array([[l for l, _ in c.tour] for c in chroms], dtype=np.int64)
    ents = np.array([[e for _, e in c.tour] for c in chroms], dtype=np.int64)
    cuts = np.array([list(c.cuts) for c in chroms], dtype=np.int64).reshape(len(chroms), -1)
    return Batch(lines, ents, cuts)


def from_batch(batch: Batch) -> list[Chromosome]:
    return [batch.chromosome(r) for r in range(len(batch))]


def segment_bounds(cuts: np.ndarray, n_lines: int) -> tuple[np.ndarray, np.ndarray]:
    n = cuts.shape[0]
    starts = np.concatenate([np.zeros((n, 1), dtype=np.int64), cuts], axis=1)
    ends = np.concatenate([cuts, np.full((n, 1), n_lines, dtype=np.int64)], axis=1)
    return starts, ends


def _rows(n):
    return np.arange(n)[:, None]


def _choose_nonempty(keys: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Uniform pick among non-empty segments using per-segment random keys."""
    return np.argmax(np.where(counts > 0, keys, -1.0), axis=1)


# --- initialization and selection ------------------------------------------


def sample_chromosomes(rng: np.random.Generator, n: int, n_lines: int, n_machines: int) -> Batch:
    """Uniform permutations, uniform entrances, uniform sorted cut points."""
    lines = np.argsort(rng.random((n, n_lines)), axis=1) + 1
    ents = rng.integers(0, 2, size=(n, n_lines))
    cuts = np.sort(rng.integers(0, n_lines + 1, size=(n, n_machines - 1)), axis=1)
    return Batch(lines.astype(np.int64), ents.astype(np.int64), cuts.astype(np.int64))


def init_population(inst: Instance, cfg: GaConfig, rng: np.random.Generator) -> list[Chromosome]:
    return from_batch(sample_chromosomes(rng, cfg.population_size, inst.n_lines, inst.n_machines))


def roulette_indices(fitnesses, n: int, rng: np.random.Generator) -> np.ndarray:
    f = np.asarray(fitnesses, dtype=float)
    if np.any(f < 0):
        raise ValueError("fitness values must be non-negative")
    cum = np.cumsum(f)
    if not cum[-1] > 0:
        raise ValueError("roulette wheel needs a positive total fitness")
    picks = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
    return np.minimum(picks, len(f) - 1)


def select_parent(population: Sequence, fitnesses, rng: np.random.Generator):
    """Roulette wheel: individual i is returned with probability f_i / sum(f)."""
    return population[int(roulette_indices(fitnesses, 1, rng)[0])]


# --- crossover ----------------------------------------------------------------


def _keep_segment_fill(keep: Batch, other: Batch, k: np.ndarray) -> Batch:
    n, L = keep.lines.shape
    rows = _rows(n)
    starts, ends = segment_bounds(keep.cuts, L)
    s = starts[np.arange(n), k][:, None]
    e = ends[np.arange(n), k][:, None]
    pos = np.arange(L)[None, :]
    in_seg = (pos >= s) & (pos < e)

    in_seg_line = np.zeros((n, L + 1), dtype=bool)
    in_seg_line[rows, keep.lines] = in_seg
    dup = in_seg_line[rows, other.lines]
    # non-duplicates of `other` in its own order go to the free positions in order;
    # `other` is a full permutation, so this always completes the child
    src = np.argsort(dup, axis=1, kind="stable")
    dst = np.argsort(in_seg, axis=1, kind="stable")
    lines = np.empty_like(keep.lines)
    ents = np.empty_like(keep.ents)
    np.put_along_axis(lines, dst, np.take_along_axis(other.lines, src, axis=1), axis=1)
    np.put_along_axis(ents, dst, np.take_along_axis(other.ents, src, axis=1), axis=1)
    lines = np.where(in_seg, keep.lines, lines)
    ents = np.where(in_seg, keep.ents, ents)
    return Batch(lines, ents, other.cuts.copy())


def crossover_batch(a: Batch, b: Batch, ka: np.ndarray, kb: np.ndarray) -> tuple[Batch, Batch]:
    """Child 1 keeps segment ``ka`` of ``a`` in place and is filled from ``b``; child 2 mirrors it."""
    return _keep_segment_fill(a, b, ka), _keep_segment_fill(b, a, kb)


def draw_crossover_segments(rng, a: Batch, b: Batch) -> tuple[np.ndarray, np.ndarray]:
    n, L = a.lines.shape
    M = a.cuts.shape[1] + 1
    sa, ea = segment_bounds(a.cuts, L)
    sb, eb = segment_bounds(b.cuts, L)
    ka = _choose_nonempty(rng.random((n, M)), ea - sa)
    kb = _choose_nonempty(rng.random((n, M)), eb - sb)
    return ka, kb


def crossover(a: Chromosome, b: Chromosome, rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    ba, bb = to_batch([a]), to_batch([b])
    ka, kb = draw_crossover_segments(rng, ba, bb)
    c1, c2 = crossover_batch(ba, bb, ka, kb)
    return c1.chromosome(0), c2.chromosome(0)


# --- elitism ------------------------------------------------------------------


def elitist_replace(parents: Sequence, offspring: Sequence, parent_fitness, offspring_fitness) -> list:
    """Offspring become the next generation; the fittest parent replaces the
    weakest offspring only if it is strictly fitter than every offspring."""
    nxt = list(offspring)
    pf = np.asarray(parent_fitness, dtype=float)
    of = np.asarray(offspring_fitness, dtype=float)
    if len(nxt) != len(parents):
        raise ValueError("parents and offspring must have the same size")
    best_parent = int(np.argmax(pf))
    if pf[best_parent] > of.max():
        nxt[int(np.argmin(of))] = parents[best_parent]
    return nxt


def _elitist_batch(parents: Batch, pobj: np.ndarray, pfit: np.ndarray, children: Batch, cobj: np.ndarray, cfit: np.ndarray):
    best_parent = int(np.argmax(pfit))
    if pfit[best_parent] > cfit.max():
        worst = int(np.argmin(cfit))
        children.lines[worst] = parents.lines[best_parent]
        children.ents[worst] = parents.ents[best_parent]
        children.cuts[worst] = parents.cuts[best_parent]
        cobj = cobj.copy()
        cobj[worst] = pobj[best_parent]
    return children, cobj


# --- mutation operators (vectorized cores) ---------------------------------


def local_inversion(b: Batch, i: np.ndarray, j: np.ndarray) -> Batch:
    """Reverse tour positions lo..hi (inclusive) per row; entrances travel with their lines."""
    L = b.lines.shape[1]
    lo = np.minimum(i, j)[:, None]
    hi = np.maximum(i, j)[:, None]
    idx = np.arange(L)[None, :]
    src = np.where((idx >= lo) & (idx <= hi), lo + hi - idx, idx)
    return Batch(np.take_along_axis(b.lines, src, 1), np.take_along_axis(b.ents, src, 1), b.cuts.copy())


def draw_local_inversion(rng, b: Batch):
    L = b.lines.shape[1]
    u = rng.random((len(b), 2))
    return (u[:, 0] * L).astype(np.int64), (u[:, 1] * L).astype(np.int64)


def swap_positions(b: Batch, p: np.ndarray, q: np.ndarray) -> Batch:
    rows = np.arange(len(b))
    lines, ents = b.lines.copy(), b.ents.copy()
    lines[rows, p], lines[rows, q] = b.lines[rows, q], b.lines[rows, p]
    ents[rows, p], ents[rows, q] = b.ents[rows, q], b.ents[rows, p]
    return Batch(lines, ents, b.cuts.copy())


def draw_intergroup_exchange(rng, b: Batch):
    """Two positions in two distinct non-empty segments; rows with fewer than two
    non-empty segments get p == q (a no-op swap)."""
    n, L = b.lines.shape
    starts, ends = segment_bounds(b.cuts, L)
    counts = ends - starts
    keys = np.where(counts > 0, rng.random(counts.shape), -1.0)
    u = rng.random((n, 2))
    order = np.argsort(-keys, axis=1, kind="stable")
    rows = np.arange(n)
    s1, s2 = order[:, 0], order[:, min(1, order.shape[1] - 1)]
    p = starts[rows, s1] + (u[:, 0] * counts[rows, s1]).astype(np.int64)
    q = starts[rows, s2] + (u[:, 1] * counts[rows, s2]).astype(np.int64)
    ok = (counts > 0).sum(axis=1) >= 2
    p = np.minimum(p, L - 1)
    q = np.where(ok, np.minimum(q, L - 1), p)
    return p, q


def transfer(b: Batch, p: np.ndarray, target: np.ndarray, slot: np.ndarray) -> Batch:
    """Move the tuple at position ``p`` into segment ``target`` before original position ``slot``.

    ``slot`` ranges over [start, end] of the target segment; cuts shift so that
    every other segment keeps its contents.
    """
    n, L = b.lines.shape
    seg = segment_index(b.cuts, L)
    source = seg[np.arange(n), p]
    p_ = p[:, None]
    q_ = slot[:, None]
    idx = np.arange(L)[None, :]
    fwd = q_ > p_
    src = idx.copy().repeat(n, axis=0)
    src = np.where(fwd & (idx >= p_) & (idx < q_ - 1), idx + 1, src)
    src = np.where(fwd & (idx == q_ - 1), p_, src)
    src = np.where(~fwd & (idx > q_) & (idx <= p_), idx - 1, src)
    src = np.where(~fwd & (idx == q_), p_, src)
    cidx = np.arange(b.cuts.shape[1])[None, :]
    cuts = b.cuts - (cidx >= source[:, None]) + (cidx >= target[:, None])
    return Batch(np.take_along_axis(b.lines, src, 1), np.take_along_axis(b.ents, src, 1), cuts)


def draw_intergroup_transfer(rng, b: Batch):
    n, L = b.lines.shape
    M = b.cuts.shape[1] + 1
    u = rng.random((n, 3))
    p = np.minimum((u[:, 0] * L).astype(np.int64), L - 1)
    seg = segment_index(b.cuts, L)
    source = seg[np.arange(n), p]
    target = (source + 1 + (u[:, 1] * max(M - 1, 1)).astype(np.int64)) % M
    starts, ends = segment_bounds(b.cuts, L)
    rows = np.arange(n)
    count = ends[rows, target] - starts[rows, target]
    slot = starts[rows, target] + np.minimum((u[:, 2] * (count + 1)).astype(np.int64), count)
    return p, target, slot


def entrance_inversion(b: Batch, k: np.ndarray) -> Batch:
    seg = segment_index(b.cuts, b.lines.shape[1])
    flip = seg == k[:, None]
    return Batch(b.lines.copy(), np.where(flip, 1 - b.ents, b.ents), b.cuts.copy())


def draw_segment_choice(rng, b: Batch) -> np.ndarray:
    starts, ends = segment_bounds(b.cuts, b.lines.shape[1])
    return _choose_nonempty(rng.random(starts.shape), ends - starts)


def intragroup_sort(b: Batch, k: np.ndarray, line_fields: np.ndarray, line_ordinals: np.ndarray) -> Batch:
    """Within segment ``k``, order each field's lines by ordinal in the positions
    they occupy and alternate entrances starting from the entrance already at
    the field's first occupied position."""
    n, L = b.lines.shape
    seg = segment_index(b.cuts, L)
    pos = np.broadcast_to(np.arange(L), (n, L))
    mask = seg == k[:, None]
    n_fields = int(line_fields.max()) + 1
    group = np.where(mask, line_fields[b.lines], n_fields + pos)
    by_ordinal = np.lexsort((line_ordinals[b.lines], group), axis=1)
    by_position = np.lexsort((pos, group), axis=1)

    lines = np.empty_like(b.lines)
    np.put_along_axis(lines, by_position, np.take_along_axis(b.lines, by_ordinal, 1), 1)

    g_sorted = np.take_along_axis(group, by_position, 1)
    e_sorted = np.take_along_axis(b.ents, by_position, 1)
    start = np.ones((n, L), dtype=bool)
    start[:, 1:] = g_sorted[:, 1:] != g_sorted[:, :-1]
    start_idx = np.maximum.accumulate(np.where(start, pos, 0), axis=1)
    rank = pos - start_idx
    anchor = np.take_along_axis(e_sorted, start_idx, 1)
    ents = np.empty_like(b.ents)
    np.put_along_axis(ents, by_position, anchor ^ (rank & 1), 1)
    return Batch(lines, ents, b.cuts.copy())


def greedy_path(b: Batch, tensor: np.ndarray) -> Batch:
    """Re-pick every entrance as the cheaper of the two legs from the previous exit
    (from the depot for the first line of a segment); ties go to entrance 0."""
    n, L = b.lines.shape
    seg = segment_index(b.cuts, L)
    ents = b.ents.copy()
    lines = b.lines
    for j in range(L):
        cur = lines[:, j]
        c0 = tensor[0, cur, 0, 0]
        c1 = tensor[0, cur, 0, 1]
        if j:
            prev = lines[:, j - 1]
            exit_ = 1 - ents[:, j - 1]
            inner = seg[:, j] == seg[:, j - 1]
            c0 = np.where(inner, tensor[prev, cur, exit_, 0], c0)
            c1 = np.where(inner, tensor[prev, cur, exit_, 1], c1)
        ents[:, j] = (c1 < c0).astype(np.int64)
    return Batch(lines.copy(), ents, b.cuts.copy())


# --- single-chromosome wrappers ---------------------------------------------


def mutate_local_inversion(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    b = to_batch([c])
    return local_inversion(b, *draw_local_inversion(rng, b)).chromosome(0)


def mutate_intergroup_exchange(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    b = to_batch([c])
    return swap_positions(b, *draw_intergroup_exchange(rng, b)).chromosome(0)


def mutate_intergroup_transfer(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    if not c.cuts:
        return c
    b = to_batch([c])
    return transfer(b, *draw_intergroup_transfer(rng, b)).chromosome(0)


def mutate_entrance_inversion(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    b = to_batch([c])
    return entrance_inversion(b, draw_segment_choice(rng, b)).chromosome(0)


def mutate_intragroup_sort(c: Chromosome, inst: Instance, rng: np.random.Generator) -> Chromosome:
    b = to_batch([c])
    k = draw_segment_choice(rng, b)
    return intragroup_sort(b, k, inst.line_fields(), inst.line_ordinals()).chromosome(0)


def mutate_greedy_path(c: Chromosome, inst: Instance, rng: Optional[np.random.Generator] = None) -> Chromosome:
    return greedy_path(to_batch([c]), inst.tensor).chromosome(0)


# --- main loop ----------------------------------------------------------------


def _crossover_step(parents: Batch, cfg: GaConfig, rng) -> Batch:
    n = len(parents)
    half = n // 2
    a = parents.take(np.arange(0, 2 * half, 2))
    b = parents.take(np.arange(1, 2 * half, 2))
    fire = rng.random(half) < cfg.p_crossover
    ka, kb = draw_crossover_segments(rng, a, b)
    c1, c2 = crossover_batch(a, b, ka, kb)
    c1 = a.where(fire, c1)
    c2 = b.where(fire, c2)
    children = Batch(parents.lines.copy(), parents.ents.copy(), parents.cuts.copy())
    children.lines[0 : 2 * half : 2], children.lines[1 : 2 * half : 2] = c1.lines, c2.lines
    children.ents[0 : 2 * half : 2], children.ents[1 : 2 * half : 2] = c1.ents, c2.ents
    children.cuts[0 : 2 * half : 2], children.cuts[1 : 2 * half : 2] = c1.cuts, c2.cuts
    return children


def mutate_batch(b: Batch, inst: Instance, cfg: GaConfig, rng) -> Batch:
    """Apply each mutation operator independently per row with its own probability."""
    n = len(b)
    M = inst.n_machines

    fire = rng.random(n) < cfg.p_local_inversion
    b = b.where(fire, local_inversion(b, *draw_local_inversion(rng, b)))

    fire = rng.random(n) < cfg.p_intergroup_exchange
    b = b.where(fire, swap_positions(b, *draw_intergroup_exchange(rng, b)))

    fire = rng.random(n) < cfg.p_intergroup_transfer
    params = draw_intergroup_transfer(rng, b)
    if M > 1:
        b = b.where(fire, transfer(b, *params))

    fire = rng.random(n) < cfg.p_entrance_inversion
    b = b.where(fire, entrance_inversion(b, draw_segment_choice(rng, b)))

    if cfg.enable_sort:
        fire = rng.random(n) < cfg.p_intragroup_sort
        k = draw_segment_choice(rng, b)
        b = b.where(fire, intragroup_sort(b, k, inst.line_fields(), inst.line_ordinals()))

    if cfg.enable_greedy:
        fire = rng.random(n) < cfg.p_greedy_path
        if fire.any():
            b = b.where(fire, greedy_path(b, inst.tensor))
    return b


def run_oga(
    inst: Instance,
    cfg: GaConfig,
    rng: Optional[np.random.Generator] = None,
    on_generation: Optional[Callable[[int, Batch], None]] = None,
) -> RunTrace:
    """Run the genetic algorithm and return the best individual ever seen."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    N = cfg.population_size
    pop = sample_chromosomes(rng, N, inst.n_lines, inst.n_machines)
    obj = objective_values(*pop, inst, cfg.objective)
    best = int(np.argmin(obj))
    best_val, best_row = float(obj[best]), pop.take([best])
    trace: list[float] = []
    if on_generation is not None:
        on_generation(0, pop)

    for gen in range(1, cfg.iterations + 1):
        fit = fitness(obj)
        parents = pop.take(roulette_indices(fit, N, rng))
        children = mutate_batch(_crossover_step(parents, cfg, rng), inst, cfg, rng)
        cobj = objective_values(*children, inst, cfg.objective)
        pop, obj = _elitist_batch(pop, obj, fit, children, cobj, fitness(cobj))
        idx = int(np.argmin(obj))
        if obj[idx] < best_val:
            best_val, best_row = float(obj[idx]), pop.take([idx])
        trace.append(best_val)
        if on_generation is not None:
            on_generation(gen, pop)

    chrom = best_row.chromosome(0)
    solution = evaluate_routes(decode(chrom, inst), inst, cfg.objective)
    return RunTrace(trace, solution, time.perf_counter() - t0, chrom)


def batch_violations(b: Batch, inst: Instance) -> list[str]:
    out = []
    for r in range(len(b)):
        for msg in chromosome_violations(b.chromosome(r), inst.n_lines, inst.n_machines):
            out.append(f"row {r}: {msg}")
    return out

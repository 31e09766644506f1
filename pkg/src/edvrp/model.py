"""Domain types for entrance-dependent routing instances, chromosomes and solutions.

Node 0 is the depot, nodes 1..L are working lines. Every node has two
entrances (0 and 1); a machine enters a line through one entrance and leaves
through the other. Distances are meters, times seconds, fuel liters.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

Point = tuple[float, float]
Route = tuple[tuple[int, int], ...]


def complement(entrance: int) -> int:
    """Return the exit used when a line is entered through ``entrance``."""
    if entrance not in (0, 1):
        raise ValueError(f"entrance must be 0 or 1, got {entrance!r}")
    return 1 - entrance


class Objective(str, enum.Enum):
    TOTAL_IDLE_DISTANCE = "s"
    MAKESPAN = "t"
    TOTAL_FUEL = "c"

    @classmethod
    def parse(cls, value: "Objective | str") -> "Objective":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown objective {value!r}; expected one of s, t, c") from None


@dataclass(frozen=True)
class Depot:
    xy: Point = (0.0, 0.0)


@dataclass(frozen=True)
class WorkingLine:
    id: int
    length_m: float
    field_id: int
    ordinal: int
    entrance0_xy: Optional[Point] = None
    entrance1_xy: Optional[Point] = None


@dataclass(frozen=True)
class Field:
    id: int
    polygon: tuple[Point, ...]


@dataclass(frozen=True)
class Machine:
    id: int
    v_w: float
    v_v: float
    c_w: float
    c_v: float


@dataclass(frozen=True, eq=False)
class Instance:
    """A task graph: depot, working lines, fleet and the 4-way distance tensor.

    ``tensor[i, j, a, b]`` is the shortest traversable distance from entrance
    ``a`` of node ``i`` to entrance ``b`` of node ``j``. The array is made
    read-only on construction.
    """

    depot: Depot
    lines: tuple[WorkingLine, ...]
    machines: tuple[Machine, ...]
    tensor: np.ndarray
    fields: tuple[Field, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "fields", tuple(self.fields))
        tensor = np.array(self.tensor, dtype=float)
        tensor.setflags(write=False)
        object.__setattr__(self, "tensor", tensor)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_machines(self) -> int:
        return len(self.machines)

    @property
    def has_geometry(self) -> bool:
        return bool(self.fields) and all(
            ln.entrance0_xy is not None and ln.entrance1_xy is not None for ln in self.lines
        )

    def line(self, line_id: int) -> WorkingLine:
        if not 1 <= line_id <= len(self.lines):
            raise ValueError(f"unknown line id {line_id}")
        return self.lines[line_id - 1]

    def line_lengths(self) -> np.ndarray:
        """Lengths indexed by node id (index 0 is the depot, length 0)."""
        return np.array([0.0] + [ln.length_m for ln in self.lines])

    def line_fields(self) -> np.ndarray:
        return np.array([-1] + [ln.field_id for ln in self.lines], dtype=np.int64)

    def line_ordinals(self) -> np.ndarray:
        return np.array([-1] + [ln.ordinal for ln in self.lines], dtype=np.int64)

    def entrance_xy(self, node: int, entrance: int) -> Point:
        if node == 0:
            return self.depot.xy
        ln = self.line(node)
        xy = ln.entrance0_xy if entrance == 0 else ln.entrance1_xy
        if xy is None:
            raise ValueError(f"line {node} has no coordinates")
        return xy


@dataclass(frozen=True)
class Chromosome:
    """A permutation of (line, entrance) tuples plus M-1 segment cut positions.

    Segment k covers ``tour[cuts[k-1]:cuts[k]]`` with implicit bounds 0 and L.
    """

    tour: tuple[tuple[int, int], ...]
    cuts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tour", tuple((int(l), int(e)) for l, e in self.tour))
        object.__setattr__(self, "cuts", tuple(int(c) for c in self.cuts))

    def segments(self) -> list[Route]:
        bounds = (0, *self.cuts, len(self.tour))
        return [self.tour[bounds[k]:bounds[k + 1]] for k in range(len(bounds) - 1)]


@dataclass(frozen=True)
class MachineMetrics:
    s_k: float  # idle meters
    s_k_w: float  # working meters
    t_k: float  # seconds
    c_k_o: float  # liters


@dataclass(frozen=True)
class Solution:
    routes: tuple[Route, ...]
    per_machine: tuple[MachineMetrics, ...]
    s_P: float
    t_P: float
    c_P: float
    objective_used: Objective = Objective.TOTAL_IDLE_DISTANCE

    def value(self, objective: "Objective | str | None" = None) -> float:
        obj = self.objective_used if objective is None else Objective.parse(objective)
        return {"s": self.s_P, "t": self.t_P, "c": self.c_P}[obj.value]


def chromosome_violations(chrom: Chromosome, n_lines: int, n_machines: int) -> list[str]:
    problems = []
    ids = [l for l, _ in chrom.tour]
    if sorted(ids) != list(range(1, n_lines + 1)):
        seen: set[int] = set()
        dup = sorted({l for l in ids if l in seen or seen.add(l)})
        missing = sorted(set(range(1, n_lines + 1)) - set(ids))
        problems.append(f"tour: not a permutation of lines 1..{n_lines} (duplicates={dup}, missing={missing})")
    bad_ent = [(l, e) for l, e in chrom.tour if e not in (0, 1)]
    if bad_ent:
        problems.append(f"tour: entrances outside {{0, 1}}: {bad_ent}")
    if len(chrom.cuts) != n_machines - 1:
        problems.append(f"cuts: expected {n_machines - 1} cut points, got {len(chrom.cuts)}")
    if list(chrom.cuts) != sorted(chrom.cuts):
        problems.append(f"cuts: not non-decreasing {chrom.cuts}")
    if any(c < 0 or c > len(chrom.tour) for c in chrom.cuts):
        problems.append(f"cuts: values outside [0, {len(chrom.tour)}]")
    return problems


def decode(chrom: Chromosome, inst: Instance) -> tuple[Route, ...]:
    """Split a chromosome into per-machine routes.

    >>> inst = Instance(Depot(), [WorkingLine(i, 1.0, 0, i - 1) for i in (1, 2, 3)],
    ...                 [Machine(1, 1, 1, 0, 0), Machine(2, 1, 1, 0, 0)], np.zeros((4, 4, 2, 2)))
    >>> decode(Chromosome(((1, 0), (2, 1), (3, 0)), (1,)), inst)
    (((1, 0),), ((2, 1), (3, 0)))
    """
    problems = chromosome_violations(chrom, inst.n_lines, inst.n_machines)
    if problems:
        raise ValueError("malformed chromosome: " + "; ".join(problems))
    return tuple(chrom.segments())


def encode(routes: Sequence[Sequence[tuple[int, int]]]) -> Chromosome:
    """Inverse of :func:`decode`."""
    tour: list[tuple[int, int]] = []
    cuts = []
    for k, route in enumerate(routes):
        if k:
            cuts.append(len(tour))
        tour.extend((int(l), int(e)) for l, e in route)
    return Chromosome(tuple(tour), tuple(cuts))


def _field_ordinal_violations(lines: Sequence[WorkingLine]) -> list[str]:
    out = []
    by_field: dict[int, list[int]] = {}
    for ln in lines:
        by_field.setdefault(ln.field_id, []).append(ln.ordinal)
    for fid, ords in sorted(by_field.items()):
        if sorted(ords) != list(range(len(ords))):
            out.append(f"lines.ordinal: field {fid} ordinals {sorted(ords)} are not 0..{len(ords) - 1}")
    return out


def validate_instance(inst: Instance) -> list[str]:
    """Check every instance invariant; return one message per violation."""
    out: list[str] = []
    L, M = inst.n_lines, inst.n_machines
    if L < 1:
        out.append("lines: at least one working line required")
    if M < 1:
        out.append("machines: at least one machine required")
    for idx, ln in enumerate(inst.lines, start=1):
        if ln.id != idx:
            out.append(f"lines[{idx - 1}].id: expected {idx}, got {ln.id}")
        if not (ln.length_m > 0 and math.isfinite(ln.length_m)):
            out.append(f"lines[{ln.id}].length_m: must be > 0 (got {ln.length_m})")
        if ln.entrance0_xy is not None and ln.entrance1_xy is not None:
            if tuple(ln.entrance0_xy) == tuple(ln.entrance1_xy):
                out.append(f"lines[{ln.id}].entrances: entrance 0 and 1 coincide")
    out.extend(_field_ordinal_violations(inst.lines))
    for idx, m in enumerate(inst.machines, start=1):
        if m.id != idx:
            out.append(f"machines[{idx - 1}].id: expected {idx}, got {m.id}")
        if not m.v_w > 0:
            out.append(f"machines[{m.id}].v_w: must be > 0 (got {m.v_w})")
        if not m.v_v > 0:
            out.append(f"machines[{m.id}].v_v: must be > 0 (got {m.v_v})")
        if m.c_w < 0:
            out.append(f"machines[{m.id}].c_w: must be >= 0 (got {m.c_w})")
        if m.c_v < 0:
            out.append(f"machines[{m.id}].c_v: must be >= 0 (got {m.c_v})")
    if inst.fields:
        known = {f.id for f in inst.fields}
        for ln in inst.lines:
            if ln.field_id not in known:
                out.append(f"lines[{ln.id}].field_id: field {ln.field_id} does not exist")
    out.extend(tensor_violations(inst.tensor, L))
    return out


def tensor_violations(d: np.ndarray, n_lines: int) -> list[str]:
    n = n_lines + 1
    if d.shape != (n, n, 2, 2):
        return [f"tensor: shape {d.shape} does not cover nodes 0..{n_lines}"]
    out = []
    off = ~np.eye(n, dtype=bool)
    vals = d[off]
    if not np.all(np.isfinite(vals)):
        out.append("tensor: non-finite entries")
    if np.any(vals < 0):
        out.append("tensor: negative entries")
    rev = d.transpose(1, 0, 3, 2)
    for i, j, a, b in zip(*np.nonzero((d != rev) & off[:, :, None, None])):
        if i < j:
            out.append(f"tensor.symmetry: d[{i}][{j}][{a}][{b}]={d[i, j, a, b]!r} != d[{j}][{i}][{b}][{a}]={d[j, i, b, a]!r}")
    depot_gap = d[0, 1:, 0, :] != d[0, 1:, 1, :]
    for j, b in zip(*np.nonzero(depot_gap)):
        out.append(f"tensor.depot: d[0][{j + 1}][0][{b}] != d[0][{j + 1}][1][{b}]")
    return out


def triangle_violations(d: np.ndarray, rtol: float = 1e-9) -> list[str]:
    """Entrance-mediated triangle inequality over all distinct node triples."""
    n = d.shape[0]
    # flatten (node, entrance) pairs into 2n vertices
    flat = d.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)
    node = np.repeat(np.arange(n), 2)
    out = []
    for k in range(2 * n):
        via = flat[:, k][:, None] + flat[k, :][None, :]
        valid = (node[:, None] != node[None, :]) & (node[:, None] != node[k]) & (node[None, :] != node[k])
        bad = valid & (flat > via + rtol * np.maximum(1.0, via))
        for u, v in zip(*np.nonzero(bad)):
            out.append(
                f"tensor.triangle: d[{node[u]}][{node[v]}][{u % 2}][{v % 2}] exceeds path via node {node[k]} entrance {k % 2}"
            )
            if len(out) > 20:
                return out
    return out


# --- JSON --------------------------------------------------------------------


def _xy(p) -> list[float]:
    return [float(p[0]), float(p[1])]


def instance_to_dict(inst: Instance) -> dict:
    L = inst.n_lines
    d = np.array(inst.tensor)
    d[np.arange(L + 1), np.arange(L + 1)] = 0.0
    return {
        "depot": {"x": float(inst.depot.xy[0]), "y": float(inst.depot.xy[1])},
        "fields": [{"id": f.id, "polygon": [_xy(p) for p in f.polygon]} for f in inst.fields],
        "lines": [
            {
                "id": ln.id,
                "field_id": ln.field_id,
                "ordinal": ln.ordinal,
                "length_m": float(ln.length_m),
                "e0": None if ln.entrance0_xy is None else _xy(ln.entrance0_xy),
                "e1": None if ln.entrance1_xy is None else _xy(ln.entrance1_xy),
            }
            for ln in inst.lines
        ],
        "machines": [
            {"id": m.id, "vw": m.v_w, "vv": m.v_v, "cw": m.c_w, "cv": m.c_v} for m in inst.machines
        ],
        "tensor": {"L": L, "data": [float(x) for x in d.reshape(-1)]},
    }


def instance_from_dict(data: dict) -> Instance:
    try:
        L = int(data["tensor"]["L"])
        flat = np.asarray(data["tensor"]["data"], dtype=float)
        if flat.size != (L + 1) * (L + 1) * 4:
            raise ValueError(f"tensor.data has {flat.size} entries, expected {(L + 1) * (L + 1) * 4}")
        lines = [
            WorkingLine(
                id=int(ln["id"]),
                length_m=float(ln["length_m"]),
                field_id=int(ln["field_id"]),
                ordinal=int(ln["ordinal"]),
                entrance0_xy=None if ln.get("e0") is None else tuple(ln["e0"]),
                entrance1_xy=None if ln.get("e1") is None else tuple(ln["e1"]),
            )
            for ln in data["lines"]
        ]
        machines = [
            Machine(int(m["id"]), float(m["vw"]), float(m["vv"]), float(m["cw"]), float(m["cv"]))
            for m in data["machines"]
        ]
        fields = [
            Field(int(f["id"]), tuple(tuple(p) for p in f["polygon"])) for f in data.get("fields", [])
        ]
        depot = Depot((float(data["depot"]["x"]), float(data["depot"]["y"])))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance JSON: {exc!r}") from exc
    return Instance(depot, lines, machines, flat.reshape(L + 1, L + 1, 2, 2), fields)


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))

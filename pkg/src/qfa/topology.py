"""Pegasus-style hardware graph and deterministic 8-qubit tile placement.

The graph is generated from the public Pegasus coordinate scheme: qubits are
(u, w, k, z) tuples with orientation u, perpendicular offset w, track k in
0..11 and parallel offset z in 0..m-2.  Three coupler families exist:

* external  (u, w, k, z) -- (u, w, k, z+1)
* odd       (u, w, 2j, z) -- (u, w, 2j+1, z)
* internal  (0, w, k, z) -- (1, w2, k2, z2) whenever the two qubit segments
  cross, i.e. w2 = z + [k2 < SHIFT_V[k]] and z2 = w - [k < SHIFT_H[k2]].

An 8-qubit tile is one K4,4 cell plus its four odd couplers (20 internal
couplers, the densest 8-qubit induced subgraph this fabric admits).  The
central cell family pairs vertical tracks 4..7 at (w, z) with horizontal
tracks 4..7 at (1, z+1, *, w); two sibling families (tracks 8..11 x 0..3
and 0..3 x 8..11) interleave with it for dense packing.

Between grid neighbours of the central family the direct coupler menu is:

* vertically adjacent tiles: external couplers between equal V slots;
* horizontally adjacent tiles: external couplers between equal H slots.

Any other inter-tile link (and every diagonal one) must hop through spare
fabric qubits; `shortest_free_path` finds such relay routes.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

SHIFT_V = (2, 2, 2, 2, 10, 10, 10, 10, 6, 6, 6, 6)
SHIFT_H = (6, 6, 6, 6, 2, 2, 2, 2, 10, 10, 10, 10)

SLOTS = ("v0", "v1", "v2", "v3", "h0", "h1", "h2", "h3")
SLOT_INDEX = {s: i for i, s in enumerate(SLOTS)}

BIAS_RANGE = (-4.0, 4.0)
COUPLING_RANGE = (-2.0, 1.0)


class InvalidSizeError(ValueError):
    """Pegasus size parameter below the supported minimum."""


class CapacityError(ValueError):
    """Requested grid does not fit; carries the largest feasible grid."""

    def __init__(self, msg, max_rows, max_cols):
        super().__init__(msg)
        self.max_rows = max_rows
        self.max_cols = max_cols


@dataclass(frozen=True)
class PegasusCoord:
    """Four-field Pegasus coordinate, bijective with the linear qubit id."""

    u: int
    w: int
    k: int
    z: int

    def to_linear(self, m: int) -> int:
        return self.z + (m - 1) * (self.k + 12 * (self.w + m * self.u))

    @classmethod
    def from_linear(cls, m: int, idx: int) -> "PegasusCoord":
        idx, z = divmod(idx, m - 1)
        idx, k = divmod(idx, 12)
        u, w = divmod(idx, m)
        return cls(u, w, k, z)

    def is_valid(self, m: int) -> bool:
        return (self.u in (0, 1) and 0 <= self.w < m and 0 <= self.k < 12
                and 0 <= self.z < m - 1)


@dataclass
class HardwareGraph:
    """Qubit/coupler topology that Ising models must respect."""

    m: int
    nodes: frozenset
    edges: frozenset            # (a, b) tuples with a < b
    adjacency: dict = field(repr=False)

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in self.edges if a < b else (b, a) in self.edges

    def degree(self, q: int) -> int:
        return len(self.adjacency[q])

    def to_json(self) -> str:
        payload = {"m": self.m, "nodes": sorted(self.nodes),
                   "edges": sorted([list(e) for e in self.edges])}
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "HardwareGraph":
        payload = json.loads(text)
        edges = frozenset(tuple(e) for e in payload["edges"])
        return cls(m=payload["m"], nodes=frozenset(payload["nodes"]),
                   edges=edges, adjacency=_adjacency(payload["nodes"], edges))


def _adjacency(nodes, edges):
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def build_pegasus(m: int) -> HardwareGraph:
    """Defect-free Pegasus graph P_m with 24*m*(m-1) qubits."""
    if m < 2:
        raise InvalidSizeError(f"Pegasus size parameter must be >= 2, got {m}")

    def lin(u, w, k, z):
        return z + (m - 1) * (k + 12 * (w + m * u))

    edges = set()
    for u in (0, 1):
        for w in range(m):
            for k in range(12):
                for z in range(m - 2):
                    edges.add((lin(u, w, k, z), lin(u, w, k, z + 1)))
    for u in (0, 1):
        for w in range(m):
            for j in range(6):
                for z in range(m - 1):
                    a, b = lin(u, w, 2 * j, z), lin(u, w, 2 * j + 1, z)
                    edges.add((min(a, b), max(a, b)))
    for w in range(m):
        for k in range(12):
            for z in range(m - 1):
                for k2 in range(12):
                    w2 = z + (1 if k2 < SHIFT_V[k] else 0)
                    z2 = w - (1 if k < SHIFT_H[k2] else 0)
                    if 0 <= w2 < m and 0 <= z2 < m - 1:
                        a, b = lin(0, w, k, z), lin(1, w2, k2, z2)
                        edges.add((min(a, b), max(a, b)))
    nodes = frozenset(range(24 * m * (m - 1)))
    edges = frozenset(edges)
    return HardwareGraph(m=m, nodes=nodes, edges=edges,
                         adjacency=_adjacency(nodes, edges))


@dataclass(frozen=True)
class TileAssignment:
    """One 8-qubit tile: grid position, slot-ordered qubits, couplers, ports."""

    row: int
    col: int
    qubits: tuple               # 8 linear qubit ids in SLOTS order
    internal_couplers: tuple    # ((a, b), ...) qubit-id pairs, a < b
    ports: dict                 # slot name -> qubit id

    def qubit(self, slot: str) -> int:
        return self.qubits[SLOT_INDEX[slot]]

    def slot_of(self, qubit: int) -> str:
        return SLOTS[self.qubits.index(qubit)]

    def slot_pairs(self):
        """Internal couplers as (slot, slot) name pairs."""
        pos = {q: SLOTS[i] for i, q in enumerate(self.qubits)}
        return tuple(tuple(sorted((pos[a], pos[b]))) for a, b in self.internal_couplers)


def _central_cell(w, z):
    """Cell family used for multiplier grids: V 4..7 at (w,z), H 4..7."""
    return ([(0, w, 4 + i, z) for i in range(4)]
            + [(1, z + 1, 4 + i, w) for i in range(4)])


def _dense_cell(col, z):
    """Dense packing: three interleaved cell families per w step."""
    j, w = col % 3, col // 3
    if j == 0:
        return _central_cell(w, z)
    if j == 1:
        return ([(0, w, 8 + i, z) for i in range(4)]
                + [(1, z + 1, i, w) for i in range(4)])
    return ([(0, w + 1, i, z) for i in range(4)]
            + [(1, z, 8 + i, w) for i in range(4)])


def max_grid(m: int, layout: str):
    """Largest (rows, cols) grid that fits on P_m for the given layout.

    Multiplier grids start at fabric offset (1, 1): corner qubits of P_m
    have reduced internal degree, and inter-tile chains need free fabric
    around every tile.
    """
    if layout == "multiplier":
        return max(0, m - 2), max(0, m - 2)
    return max(0, m - 1), max(0, 3 * (m - 1))


def _make_tile(graph, row, col, coords):
    m = graph.m
    for c in coords:
        if not PegasusCoord(*c).is_valid(m):
            raise CapacityError(
                f"tile ({row},{col}) falls off the P_{m} fabric",
                *max_grid(m, "multiplier"))
    qubits = tuple(PegasusCoord(*c).to_linear(m) for c in coords)
    couplers = tuple((min(a, b), max(a, b))
                     for i, a in enumerate(qubits) for b in qubits[i + 1:]
                     if graph.has_edge(a, b))
    return TileAssignment(row=row, col=col, qubits=qubits,
                          internal_couplers=couplers,
                          ports={s: q for s, q in zip(SLOTS, qubits)})


def place_tiles(graph: HardwareGraph, rows: int, cols: int,
                layout: str = "dense"):
    """Deterministic grid of non-overlapping 8-qubit tiles.

    layout="multiplier" uses the central cell family only, one tile per
    (w, z), leaving the two sibling families free as relay fabric for
    inter-tile chains.  layout="dense" interleaves all three families for
    maximum column count.  Both layouts guarantee at least one hardware
    edge between the port sets of horizontally and vertically adjacent
    tiles; the same arguments always produce the same placement.
    """
    if layout not in ("dense", "multiplier"):
        raise ValueError(f"unknown layout {layout!r}")
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    mr, mc = max_grid(graph.m, layout)
    if rows > mr or cols > mc:
        raise CapacityError(
            f"{rows}x{cols} grid does not fit on P_{graph.m} with layout "
            f"{layout!r} (largest feasible: {mr}x{mc})", mr, mc)
    if layout == "multiplier":
        grid = [[_make_tile(graph, r, c, _central_cell(c + 1, r + 1))
                 for c in range(cols)] for r in range(rows)]
    else:
        grid = [[_make_tile(graph, r, c, _dense_cell(c, r))
                 for c in range(cols)] for r in range(rows)]
    _check_grid(graph, grid)
    return grid


def _check_grid(graph, grid):
    seen = {}
    for line in grid:
        for t in line:
            if len(set(t.qubits)) != 8:
                raise AssertionError(f"tile ({t.row},{t.col}) repeats a qubit")
            for q in t.qubits:
                if q in seen:
                    raise AssertionError(
                        f"tiles {seen[q]} and {(t.row, t.col)} share qubit {q}")
                seen[q] = (t.row, t.col)
    rows, cols = len(grid), len(grid[0])
    for r in range(rows):
        for c in range(cols):
            if r + 1 < rows and not _any_edge(graph, grid[r][c], grid[r + 1][c]):
                raise AssertionError(f"no vertical port edge at ({r},{c})")
            if c + 1 < cols and not _any_edge(graph, grid[r][c], grid[r][c + 1]):
                raise AssertionError(f"no horizontal port edge at ({r},{c})")


def _any_edge(graph, ta, tb):
    return any(graph.has_edge(a, b) for a in ta.qubits for b in tb.qubits)


def shortest_free_path(graph: HardwareGraph, src: int, dst: int, used):
    """Shortest src->dst path whose interior avoids `used` qubits.

    Deterministic (neighbors visited in sorted order).  Returns the full
    node list including both endpoints, or None if no path exists.
    """
    if graph.has_edge(src, dst):
        return [src, dst]
    prev = {src: None}
    dq = deque([src])
    while dq:
        cur = dq.popleft()
        for nxt in sorted(graph.adjacency[cur]):
            if nxt == dst:
                path = [dst, cur]
                while prev[cur] is not None:
                    cur = prev[cur]
                    path.append(cur)
                return path[::-1]
            if nxt not in prev and nxt not in used:
                prev[nxt] = cur
                dq.append(nxt)
    return None


@dataclass
class ValidationReport:
    """Hardware-compliance findings for an Ising model."""

    missing_qubits: list = field(default_factory=list)
    missing_edges: list = field(default_factory=list)
    bias_violations: list = field(default_factory=list)      # (qubit, value)
    coupling_violations: list = field(default_factory=list)  # ((a, b), value)

    @property
    def ok(self) -> bool:
        return not (self.missing_qubits or self.missing_edges
                    or self.bias_violations or self.coupling_violations)

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "hardware-compliant"
        parts = []
        if self.missing_qubits:
            parts.append(f"{len(self.missing_qubits)} bias(es) on missing qubits")
        if self.missing_edges:
            parts.append(f"{len(self.missing_edges)} coupling(s) on missing edges")
        if self.bias_violations:
            parts.append(f"{len(self.bias_violations)} bias range violation(s)")
        if self.coupling_violations:
            parts.append(f"{len(self.coupling_violations)} coupling range violation(s)")
        return "; ".join(parts)


def validate_model(graph: HardwareGraph, model) -> ValidationReport:
    """Check every bias/coupling of `model` against the hardware graph.

    `model` needs `biases` (qubit -> value) and `couplings` (pair -> value);
    an empty (ok) report means the model is hardware-compliant.
    """
    rep = ValidationReport()
    lo_b, hi_b = BIAS_RANGE
    lo_c, hi_c = COUPLING_RANGE
    for q, v in model.biases.items():
        if q not in graph.nodes:
            rep.missing_qubits.append(q)
        if not lo_b <= v <= hi_b:
            rep.bias_violations.append((q, v))
    for (a, b), v in model.couplings.items():
        if not graph.has_edge(a, b):
            rep.missing_edges.append((a, b))
        if not lo_c <= v <= hi_c:
            rep.coupling_violations.append(((a, b), v))
    return rep

"""Ising encoding of an n x m binary multiplier from adder-cell penalties.

Logical cell (i, j) multiplies bit m_j by bit q_i and adds the incoming
partial sum and carry:

    out(i,j)   = in2 xor (m_j and q_i) xor c_in
    c_out(i,j) = majority(in2, m_j and q_i, c_in)

Wiring (LSB first; row i is multiplier bit q_i, column j multiplicand bit
m_j): in2(i,j) = out(i-1, j+1), except in2(i, n-1) = c_out(i-1, n-1);
c_in(i,j) = c_out(i, j-1); first-row in2 and column-0 c_in are constant
false.  Outputs: o_i = out(i,0), o_(m-1+j) = out(m-1,j) for j >= 1, and
o_(n+m-1) = c_out(m-1, n-1).  Cell (i, j) sits on the tile-grid column
n-1-j, so partial sums travel down-right across the fabric.

Every value shared between cells becomes a chain: a set of equivalence
links, each contributing (c - c z z') to the model.  Between grid
neighbours only equal-slot external couplers exist, so the multiplicand
broadcast is a direct vertical chain while all other shared values hop
through relay qubits in the spare fabric (deterministic shortest paths).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

from . import penalty as pen
from . import topology as topo


class InitMethod(enum.Enum):
    """The four qubit-initialization strategies."""

    API_FIX = "api"
    ADHOC_LIBRARY = "adhoc"
    EXTRA_CHAIN = "chain"
    FLUX_BIAS = "flux"


class RepresentationError(ValueError):
    """Target number does not fit the multiplier's output width."""


class MissingLibraryEntryError(KeyError):
    """The specialized-cell library lacks a required fixing combination."""


def binary_spins(number: int, width: int):
    """LSB-first spin encoding of a non-negative integer (1 -> +1, 0 -> -1)."""
    if number < 0:
        raise RepresentationError("number must be non-negative")
    if number >= (1 << width):
        raise RepresentationError(
            f"{number} does not fit in {width} bits")
    return [1 if (number >> i) & 1 else -1 for i in range(width)]


def spins_to_int(spins) -> int:
    """Inverse of binary_spins (LSB-first)."""
    return sum(1 << i for i, s in enumerate(spins) if s > 0)


@dataclass
class IsingModel:
    """Hardware-compliant spin model plus clamp and flux-bias annotations."""

    offset: float
    biases: dict                 # qubit -> bias
    couplings: dict              # (a, b) -> coupling, a < b
    clamped: dict = field(default_factory=dict)      # qubit -> spin
    flux_biases: dict = field(default_factory=dict)  # qubit -> target spin
    gap_reference: float = 0.0

    def qubits(self):
        qs = set(self.biases)
        for a, b in self.couplings:
            qs.add(a)
            qs.add(b)
        qs.update(self.clamped)
        qs.update(self.flux_biases)
        return qs

    def free_qubits(self):
        return sorted(self.qubits() - set(self.clamped))

    def copy(self) -> "IsingModel":
        return IsingModel(offset=self.offset, biases=dict(self.biases),
                          couplings=dict(self.couplings),
                          clamped=dict(self.clamped),
                          flux_biases=dict(self.flux_biases),
                          gap_reference=self.gap_reference)

    def digest(self) -> str:
        import hashlib
        return hashlib.sha256(model_to_json(None, self).encode()).hexdigest()


@dataclass
class MultiplierLayout:
    """Tile grid, chain links and name->qubit map of one built multiplier."""

    n: int
    m: int
    tiles: list                    # tiles[i][pc], pc = physical column
    penalties: dict                # (i, j) logical -> PenaltyFunction
    specs: dict                    # (i, j) logical -> BooleanSpec
    chains: list                   # (q1, q2, role) links
    role_map: dict                 # name -> qubit id
    chain_strength: float
    relays: dict = field(default_factory=dict)   # role -> (relay qubits)
    library: dict = field(default_factory=dict, repr=False)

    def tile(self, i: int, j: int) -> topo.TileAssignment:
        """Tile hosting logical cell (i, j)."""
        return self.tiles[i][self.n - 1 - j]

    def cells(self):
        for i in range(self.m):
            for j in range(self.n):
                yield i, j


def _tile_qubit(layout, i, j, role):
    return layout.role_map[f"cfa[{i},{j}].{role}"]


def rebind_penalty(pf: pen.PenaltyFunction,
                   dst: topo.TileAssignment) -> pen.PenaltyFunction:
    """Transfer an adder-cell penalty onto another tile, slot-wise.

    The slot of every weight is recovered from the placement names and the
    fixed cell template, so a library synthesized on one graph serves any
    other graph size.
    """
    slot_for = dict(pen.CFA_SLOTS)
    for i, slot in enumerate(pen.ANCILLA_SLOTS):
        slot_for[f"anc{i}"] = slot
    qmap = {pf.placement[name]: dst.qubit(slot)
            for name, slot in slot_for.items() if name in pf.placement}
    return pen.PenaltyFunction(
        offset=pf.offset,
        biases={qmap[q]: v for q, v in pf.biases.items()},
        couplings={tuple(sorted((qmap[a], qmap[b]))): v
                   for (a, b), v in pf.couplings.items()},
        gap=pf.gap,
        placement={n: qmap[q] for n, q in pf.placement.items()},
        num_ancillas=pf.num_ancillas)


def build_multiplier(n: int, m: int, graph: topo.HardwareGraph,
                     library: dict, c: float = 2.0):
    """Compose the n x m multiplier model: tile penalties plus chains.

    Returns (MultiplierLayout, IsingModel); constants and output values are
    not yet applied (see apply_problem).
    """
    if not 0.0 < c <= 2.0:
        raise ValueError(f"chain strength must be in (0, 2], got {c}")
    base_key = pen.fixing_key({})
    if base_key not in library:
        raise MissingLibraryEntryError("library lacks the base (unfixed) entry")
    tiles = topo.place_tiles(graph, m, n, layout="multiplier")
    base_pf = library[base_key]

    penalties, specs, role_map = {}, {}, {}
    spec0 = pen.cfa_spec()
    for i in range(m):
        for j in range(n):
            t = tiles[i][n - 1 - j]
            pf = rebind_penalty(base_pf, t)
            penalties[(i, j)] = pf
            specs[(i, j)] = spec0
            for role in pen.CFA_VARS:
                role_map[f"cfa[{i},{j}].{role}"] = pf.placement[role]
            for a in range(pf.num_ancillas):
                role_map[f"cfa[{i},{j}].anc{a}"] = pf.placement[f"anc{a}"]

    layout = MultiplierLayout(n=n, m=m, tiles=tiles, penalties=penalties,
                              specs=specs, chains=[], role_map=role_map,
                              chain_strength=c, library=dict(library))
    _name_variables(layout)
    _route_chains(layout, graph)
    model = _assemble_model(layout)
    return layout, model


def _name_variables(layout):
    n, m, rm = layout.n, layout.m, layout.role_map
    for j in range(n):
        rm[f"m_{j}"] = rm[f"cfa[0,{j}].m"]
    for i in range(m):
        rm[f"q_{i}"] = rm[f"cfa[{i},0].q"]
    for i in range(m):
        rm[f"o_{i}"] = rm[f"cfa[{i},0].out"]
    for j in range(1, n):
        rm[f"o_{m - 1 + j}"] = rm[f"cfa[{m - 1},{j}].out"]
    rm[f"o_{n + m - 1}"] = rm[f"cfa[{m - 1},{n - 1}].c_out"]


def _route_chains(layout, graph):
    """Create every equivalence chain, relaying through free fabric."""
    n, m = layout.n, layout.m
    used = set()
    for line in layout.tiles:
        for t in line:
            used.update(t.qubits)

    def hop(role, qa, qb):
        path = topo.shortest_free_path(graph, qa, qb, used)
        if path is None:
            raise topo.CapacityError(
                f"no fabric route for chain {role}", m, n)
        relays = tuple(path[1:-1])
        used.update(relays)
        if relays:
            layout.relays[role] = relays
        for a, b in zip(path, path[1:]):
            layout.chains.append((a, b, role))

    tq = lambda i, j, r: _tile_qubit(layout, i, j, r)
    # multiplicand broadcast: direct vertical externals
    for j in range(n):
        for i in range(m - 1):
            hop(f"m_{j}[{i}]", tq(i, j, "m"), tq(i + 1, j, "m"))
    # multiplier-bit broadcast along each row
    for i in range(m):
        for j in range(n - 1):
            hop(f"q_{i}[{j}]", tq(i, j, "q"), tq(i, j + 1, "q"))
    # carries along each row
    for i in range(m):
        for j in range(1, n):
            hop(f"carry[{i},{j}]", tq(i, j - 1, "c_out"), tq(i, j, "c_in"))
    # partial sums down-right, and the top-column sum feed
    for i in range(1, m):
        for j in range(n - 1):
            hop(f"sum[{i},{j}]", tq(i - 1, j + 1, "out"), tq(i, j, "in2"))
        hop(f"topsum[{i}]", tq(i - 1, n - 1, "c_out"), tq(i, n - 1, "in2"))


def _assemble_model(layout) -> IsingModel:
    c = layout.chain_strength
    offset = 0.0
    biases, couplings = {}, {}
    for pf in layout.penalties.values():
        offset += pf.offset
        for q, v in pf.biases.items():
            biases[q] = biases.get(q, 0.0) + v
        for e, v in pf.couplings.items():
            couplings[e] = couplings.get(e, 0.0) + v
    for a, b, _ in layout.chains:
        e = (a, b) if a < b else (b, a)
        couplings[e] = couplings.get(e, 0.0) - c
        offset += c
        biases.setdefault(a, 0.0)
        biases.setdefault(b, 0.0)
    gap_ref = min(pf.gap for pf in layout.penalties.values())
    return IsingModel(offset=offset, biases=biases, couplings=couplings,
                      gap_reference=gap_ref)


def problem_targets(layout, number: int) -> dict:
    """Qubit -> spin pins encoding N on the outputs plus the structural
    constants (first-row in2, column-0 carry-in)."""
    n, m = layout.n, layout.m
    spins = binary_spins(number, n + m)
    targets = {}
    for k, s in enumerate(spins):
        targets[layout.role_map[f"o_{k}"]] = s
    for j in range(n):
        targets[_tile_qubit(layout, 0, j, "in2")] = -1
    for i in range(m):
        targets[_tile_qubit(layout, i, 0, "c_in")] = -1
    return targets


def apply_problem(layout: MultiplierLayout, model: IsingModel, number: int,
                  method: InitMethod, chain_variant: str = "bias",
                  graph: topo.HardwareGraph = None):
    """Constrain the model to factor `number` using one init strategy.

    Returns (layout, model); the layout is re-issued when the strategy
    replaces tile penalties (the specialized-library route), otherwise it
    is returned unchanged.
    """
    method = InitMethod(method)
    targets = problem_targets(layout, number)
    if method is InitMethod.FLUX_BIAS:
        out = model.copy()
        out.flux_biases = dict(targets)
        return layout, out
    if method is InitMethod.EXTRA_CHAIN:
        return layout, _apply_extra_chain(layout, model, targets,
                                          chain_variant, graph)
    if method is InitMethod.API_FIX:
        return layout, _apply_api_fix(model, targets)
    return _apply_adhoc(layout, model, targets)


def _apply_api_fix(model: IsingModel, targets: dict) -> IsingModel:
    out = model.copy()
    for q, v in targets.items():
        out.offset += out.biases.pop(q, 0.0) * v
        for e in [e for e in out.couplings if q in e]:
            other = e[0] if e[1] == q else e[1]
            out.biases[other] = out.biases.get(other, 0.0) + out.couplings.pop(e) * v
        out.clamped[q] = v
    scale = max(
        1.0,
        max((abs(b) for b in out.biases.values()), default=0.0) / topo.BIAS_RANGE[1],
        max((-j for j in out.couplings.values()), default=0.0) / -topo.COUPLING_RANGE[0],
        max((j for j in out.couplings.values()), default=0.0) / topo.COUPLING_RANGE[1],
    )
    if scale > 1.0:
        out.offset /= scale
        out.biases = {q: b / scale for q, b in out.biases.items()}
        out.couplings = {e: j / scale for e, j in out.couplings.items()}
        out.gap_reference /= scale
    return out


def _apply_extra_chain(layout, model, targets, variant, graph) -> IsingModel:
    out = model.copy()
    if variant == "bias":
        for q, v in targets.items():
            out.biases[q] = out.biases.get(q, 0.0) - 2.0 * v
            out.offset += 2.0
        return out
    if variant != "neighbor":
        raise ValueError(f"unknown extra-chain variant {variant!r}")
    if graph is None:
        raise ValueError("the neighbor variant needs the hardware graph")
    used = set()
    for line in layout.tiles:
        for t in line:
            used.update(t.qubits)
    for a, b, _ in layout.chains:
        used.add(a)
        used.add(b)
    for q, v in targets.items():
        free = [x for x in sorted(graph.adjacency[q]) if x not in used]
        if not free:
            raise topo.CapacityError(
                f"no free neighbor to pin qubit {q}", layout.m, layout.n)
        helper = free[0]
        used.add(helper)
        # chain q -- helper, then fold helper = v into the weights
        out.biases[q] = out.biases.get(q, 0.0) - 2.0 * v
        out.offset += 2.0
        out.clamped[helper] = v
    return out


def _apply_adhoc(layout, model, targets):
    n, m = layout.n, layout.m
    inv_targets = dict(targets)

    def bitval(q):
        return 1 if inv_targets[q] > 0 else 0

    new_pen = dict(layout.penalties)
    new_specs = dict(layout.specs)
    clamped = {}
    base = pen.cfa_spec()
    for i, j in layout.cells():
        fixing = {}
        if i == 0:
            fixing["in2"] = 0
            fixing["c_in"] = 0
            if j < n - 1 or m == 1:
                # row-0 carries are structurally false; the last column's
                # carry-out feeds the row below and stays live (unless m=1)
                fixing["c_out"] = 0
        out_q = _tile_qubit(layout, i, j, "out")
        if out_q in inv_targets:
            fixing["out"] = bitval(out_q)
        cq = _tile_qubit(layout, i, j, "c_out")
        if cq in inv_targets:
            fixing["c_out"] = bitval(cq)
        if j == 0 and i > 0:
            fixing["c_in"] = 0
        if not fixing:
            continue
        key = pen.fixing_key(fixing)
        if key not in layout.library:
            raise MissingLibraryEntryError(
                f"no specialized entry for fixing {fixing}")
        t = layout.tile(i, j)
        pf = rebind_penalty(layout.library[key], t)
        new_pen[(i, j)] = pf
        new_specs[(i, j)] = pen.specialize(base, fixing)
        for var, val in fixing.items():
            clamped[pf.placement[var]] = 1 if val else -1
    new_layout = replace(layout, penalties=new_pen, specs=new_specs)
    out = _assemble_model(new_layout)
    out.clamped = clamped
    # constants implied by row-0 fixings clamp the matching chain partners
    for q, v in targets.items():
        out.clamped.setdefault(q, v)
    return new_layout, out


def circuit_assignment(layout: MultiplierLayout, p: int, q: int) -> dict:
    """Zero-energy oracle: simulate the multiplier circuit for factors p, q.

    Returns a full qubit -> spin map (tiles, ancillas at their per-row
    penalty-minimizing values, and all chain relays).
    """
    n, m = layout.n, layout.m
    if p >= (1 << n) or q >= (1 << m):
        raise RepresentationError("factors exceed the configured widths")
    mbits = [(p >> j) & 1 for j in range(n)]
    qbits = [(q >> i) & 1 for i in range(m)]
    out_b = {}
    cout_b = {}
    values = {}
    for i in range(m):
        for j in range(n):
            if i == 0:
                in2 = 0
            elif j == n - 1:
                in2 = cout_b[(i - 1, n - 1)]
            else:
                in2 = out_b[(i - 1, j + 1)]
            c_in = 0 if j == 0 else cout_b[(i, j - 1)]
            pp = mbits[j] & qbits[i]
            s = in2 + pp + c_in
            out_b[(i, j)] = s & 1
            cout_b[(i, j)] = s >> 1
            values[(i, j)] = {"m": mbits[j], "q": qbits[i], "in2": in2,
                              "c_in": c_in, "out": s & 1, "c_out": s >> 1}
    spins = {}
    for (i, j), vals in values.items():
        pf = layout.penalties[(i, j)]
        spec = layout.specs[(i, j)]
        for var, bit in vals.items():
            spins[_tile_qubit(layout, i, j, var)] = 2 * bit - 1
        free_bits = tuple(vals[v] for v in spec.variables)
        for name, bit in zip(
                [f"anc{k}" for k in range(pf.num_ancillas)],
                pen.minimizing_ancillas(pf, spec, free_bits)):
            spins[pf.placement[name]] = 2 * bit - 1
    # relay qubits copy their chain's logical value
    chain_val = {}
    for a, b, role in layout.chains:
        v = spins.get(a, spins.get(b))
        if v is None:
            v = chain_val.get(role)
        chain_val[role] = v
    for a, b, role in layout.chains:
        v = chain_val[role]
        spins.setdefault(a, v)
        spins.setdefault(b, v)
    return spins


def model_to_json(layout, model: IsingModel) -> str:
    payload = {
        "n": layout.n if layout else None,
        "m": layout.m if layout else None,
        "c": layout.chain_strength if layout else None,
        "offset": model.offset,
        "biases": {str(q): v for q, v in sorted(model.biases.items())},
        "couplings": {f"{a},{b}": v for (a, b), v in sorted(model.couplings.items())},
        "clamped": {str(q): v for q, v in sorted(model.clamped.items())},
        "flux_biases": {str(q): v for q, v in sorted(model.flux_biases.items())},
        "role_map": dict(sorted(layout.role_map.items())) if layout else {},
        "chains": [list(ch) for ch in layout.chains] if layout else [],
        "gap_reference": model.gap_reference,
    }
    return json.dumps(payload)


def model_from_json(text: str) -> IsingModel:
    p = json.loads(text)
    return IsingModel(
        offset=p["offset"],
        biases={int(q): v for q, v in p["biases"].items()},
        couplings={tuple(int(x) for x in k.split(",")): v
                   for k, v in p["couplings"].items()},
        clamped={int(q): v for q, v in p["clamped"].items()},
        flux_biases={int(q): v for q, v in p["flux_biases"].items()},
        gap_reference=p["gap_reference"])

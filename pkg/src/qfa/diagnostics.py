"""Decode samples into factor candidates; count chain and cell excitations.

A sample's total energy decomposes as the sum of per-tile local penalties
(each tile's own offset/biases/couplings) plus the chain terms; chains and
tiles are therefore diagnosed independently.  A chain is broken in a
sample when any of its links has opposite end spins; a cell is excited
when its local penalty reaches its gap (a genuine constraint violation),
while values strictly between zero and the gap are ancilla slack: the
inputs still satisfy the cell function, only the ancillas sit above their
minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .multiplier import MultiplierLayout, spins_to_int
from .sampler import evaluate_energy

ENERGY_TOL = 1e-9


@dataclass
class FactorCandidate:
    p: int
    q: int
    energy: float
    circuit_consistent: bool
    ancilla_slack: bool


@dataclass
class ExcitationReport:
    per_chain: dict               # chain role -> broken count (occurrence-weighted)
    per_cfa: dict                 # (col, row) -> excited count
    num_reads: int
    per_sample: list = field(default_factory=list)
    # per distinct sample: dict(broken=?, excited=?, slack=?, energy=?, occurrences=?)

    def clean_reads(self) -> dict:
        """Occurrence totals of samples with no broken chain / no excited
        cell / ground energy."""
        out = {"no_broken_chain": 0, "no_excited_cfa": 0, "ground": 0}
        for s in self.per_sample:
            if s["broken"] == 0:
                out["no_broken_chain"] += s["occurrences"]
            if s["excited"] == 0:
                out["no_excited_cfa"] += s["occurrences"]
            if abs(s["energy"]) <= ENERGY_TOL:
                out["ground"] += s["occurrences"]
        return out

    def to_csv(self, layout: MultiplierLayout) -> str:
        lines = ["kind,col,row,count"]
        coords = chain_coordinates(layout)
        for role in sorted(self.per_chain):
            col, row = coords[role]
            lines.append(f"chain,{col},{row},{self.per_chain[role]}")
        for (col, row) in sorted(self.per_cfa):
            lines.append(f"cfa,{col},{row},{self.per_cfa[(col, row)]}")
        return "\n".join(lines) + "\n"


def chain_coordinates(layout: MultiplierLayout) -> dict:
    """Logical (col, row) position of every chain role, for plot exports."""
    coords = {}
    for _, _, role in layout.chains:
        if role in coords:
            continue
        name, _, idx = role.partition("[")
        idx = idx.rstrip("]")
        if name.startswith("m_"):
            coords[role] = (int(name[2:]), int(idx))
        elif name.startswith("q_"):
            coords[role] = (int(idx), int(name[2:]))
        elif name == "carry" or name == "sum":
            i, j = (int(x) for x in idx.split(","))
            coords[role] = (j, i)
        elif name == "topsum":
            coords[role] = (layout.n - 1, int(idx))
        else:
            coords[role] = (-1, -1)
    return coords


def _full_spins(layout, model, sample: dict) -> dict:
    full = dict(sample)
    full.update(model.clamped)
    return full


def tile_values(layout, model, sample: dict, i: int, j: int) -> dict:
    """Bit values of one cell's six variables in a sample."""
    full = _full_spins(layout, model, sample)
    out = {}
    for var in ("m", "q", "in2", "c_in", "out", "c_out"):
        q = layout.role_map[f"cfa[{i},{j}].{var}"]
        out[var] = 1 if full[q] > 0 else 0
    return out


def tile_local_penalty(layout, model, sample: dict, i: int, j: int) -> float:
    """The cell's own penalty value (chain terms excluded)."""
    full = _full_spins(layout, model, sample)
    pf = layout.penalties[(i, j)]
    total = Fraction(pf.offset)
    for q, v in pf.biases.items():
        total += Fraction(v) * full[q]
    for (a, b), v in pf.couplings.items():
        total += Fraction(v) * full[a] * full[b]
    return float(total)


def decode(layout: MultiplierLayout, model, sample: dict) -> FactorCandidate:
    """Read the factor bits out of a sample and validate every cell."""
    full = _full_spins(layout, model, sample)
    p = spins_to_int([full[layout.role_map[f"m_{j}"]] for j in range(layout.n)])
    q = spins_to_int([full[layout.role_map[f"q_{i}"]] for i in range(layout.m)])
    energy = evaluate_energy(model, sample)
    consistent = True
    slack = False
    base_truth = None
    for i, j in layout.cells():
        vals = tile_values(layout, model, sample, i, j)
        s = vals["in2"] + (vals["m"] & vals["q"]) + vals["c_in"]
        if not (vals["out"] == (s & 1) and vals["c_out"] == (s >> 1)):
            consistent = False
        local = tile_local_penalty(layout, model, sample, i, j)
        gap = layout.penalties[(i, j)].gap
        if ENERGY_TOL < local < gap - ENERGY_TOL:
            slack = True
    del base_truth
    return FactorCandidate(p=p, q=q, energy=energy,
                           circuit_consistent=consistent, ancilla_slack=slack)


def excitation_stats(layout: MultiplierLayout, model, sampleset) -> ExcitationReport:
    """Broken-chain and excited-cell counts over a sample set."""
    chain_links = {}
    for a, b, role in layout.chains:
        chain_links.setdefault(role, []).append((a, b))
    per_chain = {role: 0 for role in chain_links}
    per_cfa = {(j, i): 0 for i, j in layout.cells()}
    per_sample = []
    gaps = {(i, j): layout.penalties[(i, j)].gap for i, j in layout.cells()}
    for sample, energy, occ in sampleset.spins_dicts():
        full = _full_spins(layout, model, sample)
        broken = 0
        for role, links in chain_links.items():
            if any(full[a] != full[b] for a, b in links):
                per_chain[role] += occ
                broken += 1
        excited = 0
        slack = 0
        for i, j in layout.cells():
            local = tile_local_penalty(layout, model, sample, i, j)
            if local >= gaps[(i, j)] - ENERGY_TOL:
                per_cfa[(j, i)] += occ
                excited += 1
            elif local > ENERGY_TOL:
                slack += 1
        per_sample.append({"broken": broken, "excited": excited,
                           "slack": slack, "energy": energy,
                           "occurrences": occ})
    return ExcitationReport(per_chain=per_chain, per_cfa=per_cfa,
                            num_reads=sampleset.num_reads,
                            per_sample=per_sample)


def most_excited(report: ExcitationReport):
    """Argmax cell of the excitation counts; ties break toward the
    lexicographically smallest (col, row)."""
    return min(report.per_cfa, key=lambda cr: (-report.per_cfa[cr], cr))

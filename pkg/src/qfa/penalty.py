"""Penalty-function synthesis and verification for adder cells.

A penalty function over spins z in {-1,+1} is

    P(x, a) = offset + sum_i theta_i z_i + sum_(ij) theta_ij z_i z_j

subject to: for every input x satisfying the cell's Boolean function the
minimum over ancilla assignments a is exactly 0 (and P >= 0 everywhere),
while for every non-satisfying input that minimum is at least the gap.
Synthesis maximizes the gap subject to the hardware weight ranges (biases
in [-4,4], couplings in [-2,1]) and the tile's available couplers.

The search over ancilla valuations and weights is solved as one
mixed-integer linear program (binary indicators select which ancilla
assignment reaches zero on each satisfying row), followed by a pure-LP
polish at tight tolerances and a rational snap so that verification
residuals vanish exactly.  Verification is in exact Fraction arithmetic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .topology import BIAS_RANGE, COUPLING_RANGE, SLOTS, TileAssignment

CFA_VARS = ("m", "q", "in2", "c_in", "out", "c_out")

# Slot template for the adder cell, chosen by placement search: (m, q) share a
# vertical odd pair so the partial-product coupler exists; this is the layout
# with the maximum achievable gap (2) on the 20-coupler tile.
CFA_SLOTS = {"m": "v0", "q": "v1", "c_out": "v2", "in2": "h0",
             "c_in": "h1", "out": "h2"}
ANCILLA_SLOTS = ("h3", "v3")

GAP_CAP = 24.0          # synthesis search ceiling for the gap variable
RESIDUAL_TOL = 1e-9
GAP_SLACK = 1e-6


class EmptySpecError(ValueError):
    """Fixing contradicts the spec or earlier fixings."""


class InfeasibleError(ValueError):
    """No penalty with a positive gap exists for this placement/budget."""

    def __init__(self, msg, violated_row=None):
        super().__init__(msg)
        self.violated_row = violated_row


@dataclass(frozen=True)
class BooleanSpec:
    """A Boolean function over named variables, with an optional fixing.

    `truth` is total over the original variable set; `fixing` maps some
    variables to 0/1 and removes them from the free set.
    """

    name: str
    all_vars: tuple
    truth: object                    # callable: dict[str,int] -> bool
    fixing: dict = field(default_factory=dict)
    preferred_slots: dict = field(default_factory=dict)

    @property
    def variables(self):
        return tuple(v for v in self.all_vars if v not in self.fixing)

    def holds(self, assignment: dict) -> bool:
        full = dict(assignment)
        full.update(self.fixing)
        return bool(self.truth(full))

    def rows(self):
        """Yield (bits, satisfied) over all free-variable assignments."""
        free = self.variables
        for bits in itertools.product((0, 1), repeat=len(free)):
            yield bits, self.holds(dict(zip(free, bits)))

    def satisfying_count(self) -> int:
        return sum(1 for _, ok in self.rows() if ok)


def cfa_spec() -> BooleanSpec:
    """Controlled full adder: out = in2 xor (m and q) xor c_in, carry out
    the majority of the three summands."""

    def truth(v):
        s = v["in2"] + (v["m"] & v["q"]) + v["c_in"]
        return v["out"] == (s & 1) and v["c_out"] == (s >> 1)

    return BooleanSpec(name="cfa", all_vars=CFA_VARS, truth=truth,
                       preferred_slots=dict(CFA_SLOTS))


def equivalence_spec() -> BooleanSpec:
    """Two-variable equivalence, the building block of chains."""
    return BooleanSpec(name="equiv", all_vars=("z", "zp"),
                       truth=lambda v: v["z"] == v["zp"])


def specialize(spec: BooleanSpec, fixing: dict) -> BooleanSpec:
    """Conjoin the spec with fixing literals and drop the fixed variables."""
    for var, val in fixing.items():
        if var not in spec.all_vars:
            raise ValueError(f"cannot fix unknown variable {var!r}")
        if var in spec.fixing and spec.fixing[var] != int(val):
            raise EmptySpecError(
                f"{var} already fixed to {spec.fixing[var]}, cannot refix to {val}")
    merged = dict(spec.fixing)
    merged.update({k: int(v) for k, v in fixing.items()})
    out = replace(spec, fixing=merged)
    if out.satisfying_count() == 0:
        raise EmptySpecError(f"fixing {merged} leaves no satisfying assignment")
    return out


@dataclass(frozen=True)
class PenaltyFunction:
    """Synthesized penalty: weights, achieved gap and qubit placement."""

    offset: float
    biases: dict                  # qubit id -> value
    couplings: dict               # (a, b) qubit pair -> value
    gap: float
    placement: dict               # variable/ancilla name -> qubit id
    num_ancillas: int

    def scaled(self, lam: float) -> "PenaltyFunction":
        """Multiply all weights (and the gap) by lam > 0."""
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        return PenaltyFunction(
            offset=self.offset * lam,
            biases={q: v * lam for q, v in self.biases.items()},
            couplings={e: v * lam for e, v in self.couplings.items()},
            gap=self.gap * lam,
            placement=dict(self.placement),
            num_ancillas=self.num_ancillas)

    def energy(self, spins: dict):
        """Exact penalty value for a full +-1 assignment (qubit -> spin)."""
        total = Fraction(self.offset)
        for q, v in self.biases.items():
            total += Fraction(v) * spins[q]
        for (a, b), v in self.couplings.items():
            total += Fraction(v) * spins[a] * spins[b]
        return total


@dataclass
class VerificationResult:
    satisfies_spec: bool
    measured_gap: float
    worst_sat_residual: float
    slack_solution_count: int


def _spin(bit):
    return 2 * bit - 1


def _placement_for(spec, tile, num_ancillas):
    taken = {}
    free_slots = list(SLOTS)
    for var in spec.all_vars:
        slot = spec.preferred_slots.get(var)
        if slot is not None:
            taken[var] = slot
            free_slots.remove(slot)
    for var in spec.all_vars:
        if var not in taken:
            taken[var] = free_slots.pop(0)
    ancillas = []
    for i in range(num_ancillas):
        for cand in ANCILLA_SLOTS:
            if cand in free_slots:
                free_slots.remove(cand)
                break
        else:
            cand = free_slots.pop(0)
        name = f"anc{i}"
        taken[name] = cand
        ancillas.append(name)
    placement = {name: tile.qubit(slot) for name, slot in taken.items()}
    return placement, ancillas


def _row_matrix(spec, tile, placement, ancillas):
    """Per-assignment coefficient rows for [offset, biases..., couplings...]."""
    free = spec.variables
    order = list(free) + ancillas
    qubits = [placement[n] for n in order]
    qpos = {q: i for i, q in enumerate(qubits)}
    cps = [(a, b) for (a, b) in tile.internal_couplers
           if a in qpos and b in qpos]
    nq, nc, na = len(order), len(cps), len(ancillas)

    sat_bits, unsat_bits = [], []
    for bits, ok in spec.rows():
        (sat_bits if ok else unsat_bits).append(bits)

    def rows_for(bits_list):
        out = np.empty((len(bits_list), 2 ** na, 1 + nq + nc))
        for i, bits in enumerate(bits_list):
            for j, abits in enumerate(itertools.product((0, 1), repeat=na)):
                z = [_spin(b) for b in bits] + [_spin(a) for a in abits]
                row = [1.0] + z + [z[qpos[a]] * z[qpos[b]] for a, b in cps]
                out[i, j] = row
        return out

    return order, qubits, cps, sat_bits, unsat_bits, rows_for(sat_bits), rows_for(unsat_bits)


def _solve_milp(A_sat, A_unsat, nq, nc, bias_bound, gap_cap, forced_gap=None,
                minimize_slack=False):
    """One MILP: maximize gap (or minimize slack rows at a fixed gap)."""
    nsat, nanc2 = A_sat.shape[0], A_sat.shape[1]
    ncont = 1 + nq + nc + 1                      # offset, weights, gap
    nbin = nsat * nanc2 if not minimize_slack else 2 * nsat * nanc2
    ntot = ncont + nbin
    M = 4 * (1 + 4 * nq + 2 * nc)

    rows, lb, ub = [], [], []

    def add(row, lo, hi):
        rows.append(row)
        lb.append(lo)
        ub.append(hi)

    gidx = ncont - 1
    ybase = ncont
    sbase = ncont + nsat * nanc2
    for i in range(nsat):
        for j in range(nanc2):
            base = np.zeros(ntot)
            base[:1 + nq + nc] = A_sat[i, j]
            add(base.copy(), 0.0, np.inf)                       # P >= 0
            row = base.copy()
            row[ybase + i * nanc2 + j] = M
            add(row, -np.inf, M)                                # P <= M(1-y)
            if minimize_slack:
                row = base.copy()
                row[sbase + i * nanc2 + j] = -M
                add(row, -np.inf, 0.0)                          # P <= M*s
        row = np.zeros(ntot)
        row[ybase + i * nanc2:ybase + (i + 1) * nanc2] = 1.0
        add(row, 1.0, np.inf)                                   # some y = 1
    for i in range(A_unsat.shape[0]):
        for j in range(nanc2):
            row = np.zeros(ntot)
            row[:1 + nq + nc] = A_unsat[i, j]
            row[gidx] = -1.0
            add(row, 0.0, np.inf)                               # P >= gap

    c = np.zeros(ntot)
    if minimize_slack:
        c[sbase:] = 1.0
    else:
        c[gidx] = -1.0
    integrality = np.zeros(ntot)
    integrality[ncont:] = 1
    vlb = np.full(ntot, -np.inf)
    vub = np.full(ntot, np.inf)
    vlb[1:1 + nq] = -bias_bound
    vub[1:1 + nq] = bias_bound
    vlb[1 + nq:1 + nq + nc] = COUPLING_RANGE[0]
    vub[1 + nq:1 + nq + nc] = COUPLING_RANGE[1]
    vlb[gidx] = forced_gap if forced_gap is not None else 0.0
    vub[gidx] = forced_gap if forced_gap is not None else gap_cap
    vlb[ncont:] = 0
    vub[ncont:] = 1
    res = milp(c=c, constraints=LinearConstraint(np.array(rows), lb, ub),
               integrality=integrality, bounds=Bounds(vlb, vub))
    if not res.success:
        return None
    return res.x[:ncont], res.x[ybase:ybase + nsat * nanc2].round().astype(int)


def _polish_lp(A_sat, A_unsat, valuation, nq, nc, bias_bound, gap_cap):
    """Re-solve the LP for a fixed ancilla valuation at tight tolerances."""
    nsat, nanc2 = A_sat.shape[0], A_sat.shape[1]
    nvar = 1 + nq + nc + 1
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i in range(nsat):
        for j in range(nanc2):
            row = np.concatenate([A_sat[i, j], [0.0]])
            if valuation[i * nanc2 + j]:
                A_eq.append(row)
                b_eq.append(0.0)
            else:
                A_ub.append(-row)
                b_ub.append(0.0)
    for i in range(A_unsat.shape[0]):
        for j in range(nanc2):
            A_ub.append(np.concatenate([-A_unsat[i, j], [1.0]]))
            b_ub.append(0.0)
    c = np.zeros(nvar)
    c[-1] = -1.0
    bounds = ([(None, None)] + [(-bias_bound, bias_bound)] * nq
              + [list(COUPLING_RANGE)] * nc + [(0, gap_cap)])
    res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                  A_eq=np.array(A_eq) if A_eq else None,
                  b_eq=np.array(b_eq) if b_eq else None,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-9})
    if not res.success:
        return None
    return res.x


def _snap(values, max_den=48):
    return [Fraction(v).limit_denominator(max_den) for v in values]


def _exact_check(theta, A_sat, A_unsat):
    """Exact (Fraction) residual and gap for candidate weights."""
    th = [Fraction(t) if not isinstance(t, Fraction) else t for t in theta]

    def pval(row):
        return sum(t * Fraction(int(r)) for t, r in zip(th, row))

    worst_resid = Fraction(0)
    for i in range(A_sat.shape[0]):
        vals = [pval(A_sat[i, j]) for j in range(A_sat.shape[1])]
        if any(v < 0 for v in vals):
            return None, None
        worst_resid = max(worst_resid, abs(min(vals)))
    gap = None
    for i in range(A_unsat.shape[0]):
        v = min(pval(A_unsat[i, j]) for j in range(A_unsat.shape[1]))
        gap = v if gap is None else min(gap, v)
    return worst_resid, gap


def synthesize_penalty(spec: BooleanSpec, tile: TileAssignment,
                       num_ancillas: int = 2, bias_bound: float = None,
                       gap_cap: float = GAP_CAP,
                       minimize_slack: bool = False) -> PenaltyFunction:
    """Max-min gap synthesis of a penalty function on one tile.

    With minimize_slack=True a second pass holds the achieved gap and
    minimizes the number of satisfying rows left strictly above zero
    (the tie-break objective of the low-slack adder variant).
    """
    if len(spec.variables) + num_ancillas > 8:
        raise ValueError("free variables + ancillas exceed the 8-qubit tile")
    if bias_bound is None:
        # Base cells keep biases within [-1,1] so later value-pinning terms
        # (+-2 per qubit) can never push a bias out of [-3,3]; specialized
        # cells are never pinned and may use the full hardware range.
        bias_bound = 1.0 if not spec.fixing else BIAS_RANGE[1]
    placement, ancillas = _placement_for(spec, tile, num_ancillas)
    (order, qubits, cps, sat_bits, unsat_bits,
     A_sat, A_unsat) = _row_matrix(spec, tile, placement, ancillas)
    if not sat_bits:
        raise EmptySpecError(f"spec {spec.name} has no satisfying assignment")
    nq, nc = len(order), len(cps)

    sol = _solve_milp(A_sat, A_unsat, nq, nc, bias_bound, gap_cap)
    if sol is None:
        raise InfeasibleError("penalty synthesis MILP failed")
    theta, valuation = sol
    if A_unsat.shape[0] and theta[-1] <= 1e-7:
        worst = _violated_row(theta, A_unsat, unsat_bits)
        raise InfeasibleError(
            f"no positive gap achievable for {spec.name} on this tile "
            f"(violated input row: {worst})", violated_row=worst)
    if minimize_slack:
        sol2 = _solve_milp(A_sat, A_unsat, nq, nc, bias_bound, gap_cap,
                           forced_gap=float(np.floor(theta[-1] * 1e6) / 1e6),
                           minimize_slack=True)
        if sol2 is not None:
            theta, valuation = sol2

    polished = _polish_lp(A_sat, A_unsat, valuation, nq, nc, bias_bound, gap_cap)
    if polished is not None:
        theta = polished

    # rational snap: keep it only if exactly valid and no worse
    snapped = _snap(theta)
    resid, gap = _exact_check(snapped, A_sat, A_unsat)
    if resid == 0 and gap is not None and float(gap) >= theta[-1] - GAP_SLACK:
        values = [float(v) for v in snapped[:-1]] + [float(gap)]
    else:
        resid_f, gap_f = _exact_check([Fraction(t) for t in theta], A_sat, A_unsat)
        gap_val = float(gap_f) if gap_f is not None else theta[-1]
        values = list(theta[:-1]) + [gap_val]

    offset = values[0]
    biases = {placement[n]: values[1 + i] for i, n in enumerate(order)}
    couplings = {e: values[1 + nq + k] for k, e in enumerate(cps)}
    # fixed variables keep their qubit with zero weight: variable eliminated
    for var in spec.fixing:
        biases.setdefault(placement[var], 0.0)
    return PenaltyFunction(offset=offset, biases=biases, couplings=couplings,
                           gap=values[-1], placement=placement,
                           num_ancillas=num_ancillas)


def _violated_row(theta, A_unsat, unsat_bits):
    vals = [min(float(A_unsat[i, j] @ theta[:-1])
                for j in range(A_unsat.shape[1]))
            for i in range(A_unsat.shape[0])]
    return unsat_bits[int(np.argmin(vals))]


def verify_penalty(pf: PenaltyFunction, spec: BooleanSpec) -> VerificationResult:
    """Exhaustive check of the penalty against the spec (exact arithmetic)."""
    free = spec.variables
    ancillas = [n for n in pf.placement
                if n not in spec.all_vars][:pf.num_ancillas]
    worst_resid = Fraction(0)
    measured_gap = None
    slack_count = 0
    claimed = Fraction(pf.gap)
    for bits, ok in spec.rows():
        spins = {pf.placement[n]: _spin(b) for n, b in zip(free, bits)}
        for var, val in spec.fixing.items():
            if pf.placement.get(var) is not None:
                spins[pf.placement[var]] = _spin(val)
        vals = []
        for abits in itertools.product((0, 1), repeat=len(ancillas)):
            for n, b in zip(ancillas, abits):
                spins[pf.placement[n]] = _spin(b)
            vals.append(pf.energy(spins))
        best = min(vals)
        if ok:
            worst_resid = max(worst_resid, abs(best))
            if any(0 < v < claimed for v in vals):
                slack_count += 1
        else:
            measured_gap = best if measured_gap is None else min(measured_gap, best)
    measured = float(measured_gap) if measured_gap is not None else float("inf")
    ok_flag = (worst_resid <= Fraction(RESIDUAL_TOL)
               and measured >= pf.gap - GAP_SLACK)
    return VerificationResult(satisfies_spec=bool(ok_flag),
                              measured_gap=measured,
                              worst_sat_residual=float(worst_resid),
                              slack_solution_count=slack_count)


def minimizing_ancillas(pf: PenaltyFunction, spec: BooleanSpec, bits) -> tuple:
    """First ancilla assignment reaching the per-row minimum for input bits."""
    free = spec.variables
    ancillas = [n for n in pf.placement
                if n not in spec.all_vars][:pf.num_ancillas]
    spins = {pf.placement[n]: _spin(b) for n, b in zip(free, bits)}
    for var, val in spec.fixing.items():
        if pf.placement.get(var) is not None:
            spins[pf.placement[var]] = _spin(val)
    best, best_bits = None, ()
    for abits in itertools.product((0, 1), repeat=len(ancillas)):
        for n, b in zip(ancillas, abits):
            spins[pf.placement[n]] = _spin(b)
        e = pf.energy(spins)
        if best is None or e < best:
            best, best_bits = e, abits
    return best_bits


def border_fixings(n: int = None, m: int = None):
    """Input-fixing combinations occurring at the multiplier borders.

    Row 0 of the multiplier carries no incoming partial sums, so its in2,
    c_in and (except in the last column) c_out are structurally false;
    output-bit tiles additionally pin out / c_out values.  The full list
    covers every border class of any n x m grid, degenerate shapes included.
    """
    combos = [{}]
    both = [0, 1]
    combos += [{"in2": 0, "c_in": 0, "c_out": 0, "out": v} for v in both]
    combos.append({"in2": 0, "c_in": 0, "c_out": 0})
    combos.append({"in2": 0, "c_in": 0})
    combos += [{"c_in": 0, "out": v} for v in both]
    combos += [{"out": v} for v in both]
    combos += [{"out": v, "c_out": w} for v in both for w in both]
    combos += [{"c_in": 0, "out": v, "c_out": w} for v in both for w in both]
    combos += [{"in2": 0, "c_in": 0, "out": v} for v in both]
    combos += [{"in2": 0, "c_in": 0, "out": v, "c_out": w}
               for v in both for w in both]
    return combos


def fixing_key(fixing: dict) -> tuple:
    return tuple(sorted(fixing.items()))


def build_specialized_library(tile: TileAssignment, num_ancillas: int = 2,
                              minimize_slack: bool = False) -> dict:
    """Synthesize and verify the full border library for one tile.

    Returns {fixing_key(fixing): PenaltyFunction}; every entry has passed
    verify_penalty.  The unfixed entry is the plain base-cell synthesis.
    """
    base = cfa_spec()
    lib = {}
    for fixing in border_fixings():
        try:
            spec = specialize(base, fixing) if fixing else base
        except EmptySpecError:
            # e.g. out=1, c_out=1 with c_in=0: two bits cannot sum to 3.
            # Such borders only arise for numbers with no factorization at
            # the given widths, so no entry is needed.
            continue
        pf = synthesize_penalty(spec, tile, num_ancillas=num_ancillas,
                                minimize_slack=minimize_slack)
        check = verify_penalty(pf, spec)
        if not check.satisfies_spec:
            raise InfeasibleError(
                f"library entry {fixing} failed verification "
                f"(gap {check.measured_gap}, residual {check.worst_sat_residual})")
        lib[fixing_key(fixing)] = pf
    return lib


def library_to_json(lib: dict) -> str:
    entries = []
    for key, pf in sorted(lib.items()):
        entries.append({
            "fixing": {k: v for k, v in key},
            "offset": pf.offset,
            "biases": {str(q): v for q, v in sorted(pf.biases.items())},
            "couplings": {f"{a},{b}": v
                          for (a, b), v in sorted(pf.couplings.items())},
            "gap": pf.gap,
            "placement": dict(sorted(pf.placement.items())),
            "num_ancillas": pf.num_ancillas,
        })
    return json.dumps(entries, indent=1)


def library_from_json(text: str) -> dict:
    lib = {}
    for e in json.loads(text):
        pf = PenaltyFunction(
            offset=e["offset"],
            biases={int(q): v for q, v in e["biases"].items()},
            couplings={tuple(int(x) for x in k.split(",")): v
                       for k, v in e["couplings"].items()},
            gap=e["gap"],
            placement=dict(e["placement"]),
            num_ancillas=e["num_ancillas"])
        lib[fixing_key(e["fixing"])] = pf
    return lib

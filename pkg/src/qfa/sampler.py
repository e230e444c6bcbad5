"""Samplers for Ising models: exact enumeration and simulated annealing.

The annealer is the classical stand-in for the quantum device.  Each read
is an independent Metropolis anneal over a geometric inverse-temperature
ramp.  Per-qubit anneal offsets shift the schedule progress: qubit i at
global progress s runs at s_i = clamp(s + offset_scale * dc_i, 0, 1), so a
positive dc_i advances (cools and freezes earlier) and a negative one
delays.  Flux-biased qubits feel an extra field toward their target during
the dynamics only; reported energies never include it.

Reads draw from independent counter-based random streams keyed by
(master_seed, read), so results are byte-identical regardless of execution
order or thread count.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

MAX_ABS_OFFSET = 0.2
EXACT_LIMIT = 26


class IncompleteAssignmentError(ValueError):
    """A spin assignment misses a qubit the model references."""


class TooManyQubitsError(ValueError):
    """Exact enumeration refused: too many free qubits."""


class ConfigError(ValueError):
    """Invalid annealing configuration."""


@dataclass
class AnnealConfig:
    """Knobs of one annealing run; the schedule is a geometric beta ramp."""

    num_reads: int = 1000
    sweeps: int = 500
    beta_start: float = 0.1
    beta_end: float = 10.0
    offsets: dict = field(default_factory=dict)   # qubit -> delta c
    offset_scale: float = 1.0
    flux_strength: float = 10.0
    master_seed: int = 0

    def validate(self):
        if self.num_reads < 1:
            raise ConfigError("num_reads must be >= 1")
        if self.sweeps < 1:
            raise ConfigError("sweeps must be >= 1")
        if not 0 < self.beta_start <= self.beta_end:
            raise ConfigError("schedule must be monotone non-decreasing "
                              "with positive inverse temperature")
        for q, dc in self.offsets.items():
            if abs(dc) > MAX_ABS_OFFSET:
                raise ConfigError(
                    f"anneal offset {dc} on qubit {q} exceeds |{MAX_ABS_OFFSET}|")
        if self.flux_strength < 0:
            raise ConfigError("flux_strength must be >= 0")

    def to_dict(self):
        return {"num_reads": self.num_reads, "sweeps": self.sweeps,
                "beta_start": self.beta_start, "beta_end": self.beta_end,
                "offsets": {str(q): v for q, v in sorted(self.offsets.items())},
                "offset_scale": self.offset_scale,
                "flux_strength": self.flux_strength,
                "master_seed": self.master_seed}

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class SampleSet:
    """Sampler output: distinct spin vectors with energies and multiplicity."""

    qubit_order: tuple            # free qubits, ascending
    samples: list                 # (spins tuple of +-1, energy, occurrences)
    num_reads: int
    model_digest: str = ""
    config_digest: str = ""

    def lowest_energy(self) -> float:
        return min(e for _, e, _ in self.samples)

    def ground_reads(self, tol: float = 1e-9) -> int:
        return sum(occ for _, e, occ in self.samples if abs(e) <= tol)

    def spins_dicts(self):
        for spins, e, occ in self.samples:
            yield dict(zip(self.qubit_order, spins)), e, occ

    def to_csv(self) -> str:
        lines = ["read_id,energy,occurrences,spins"]
        for rid, (spins, e, occ) in enumerate(self.samples):
            s = "".join("+" if x > 0 else "-" for x in spins)
            lines.append(f"{rid},{e!r},{occ},{s}")
        return "\n".join(lines) + "\n"


def evaluate_energy(model, spins: dict) -> float:
    """offset + sum biases*z + sum couplings*z*z'; clamps substituted,
    flux biases excluded."""
    full = dict(spins)
    full.update(model.clamped)
    total = model.offset
    try:
        for q, v in model.biases.items():
            total += v * full[q]
        for (a, b), v in model.couplings.items():
            total += v * full[a] * full[b]
    except KeyError as exc:
        raise IncompleteAssignmentError(
            f"no spin assigned to qubit {exc.args[0]}") from None
    return total


def _reduced_arrays(model):
    """Fold clamps; return (free qubits, h, offset, coupling CSR arrays)."""
    free = model.free_qubits()
    index = {q: i for i, q in enumerate(free)}
    n = len(free)
    h = np.zeros(n)
    off = model.offset
    pairs = {}
    for q, v in model.biases.items():
        if q in index:
            h[index[q]] += v
        else:
            off += v * model.clamped[q]
    for (a, b), v in model.couplings.items():
        ca, cb = a in model.clamped, b in model.clamped
        if ca and cb:
            off += v * model.clamped[a] * model.clamped[b]
        elif ca:
            h[index[b]] += v * model.clamped[a]
        elif cb:
            h[index[a]] += v * model.clamped[b]
        else:
            i, j = index[a], index[b]
            pairs[(min(i, j), max(i, j))] = pairs.get((min(i, j), max(i, j)), 0.0) + v
    nbr = [[] for _ in range(n)]
    for (i, j), v in pairs.items():
        nbr[i].append((j, v))
        nbr[j].append((i, v))
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + len(nbr[i])
    indices = np.zeros(indptr[-1], dtype=np.int64)
    weights = np.zeros(indptr[-1])
    for i in range(n):
        for k, (j, v) in enumerate(sorted(nbr[i])):
            indices[indptr[i] + k] = j
            weights[indptr[i] + k] = v
    return free, h, off, indptr, indices, weights, pairs


@njit(cache=True, inline="always")
def _mix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _uniform(state):
    state, z = _mix(state)
    return state, (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, parallel=True)
def _sa_kernel(h, indptr, indices, weights, beta, master_seed, num_reads,
               out_spins):
    n = h.shape[0]
    sweeps = beta.shape[0]
    for r in prange(num_reads):
        state = np.uint64(0x8000000000000000) ^ (
            np.uint64(master_seed) * np.uint64(0x9E3779B97F4A7C15)
            + np.uint64(r + 1) * np.uint64(0xD1B54A32D192ED03))
        spins = np.empty(n, dtype=np.int8)
        for i in range(n):
            state, u = _uniform(state)
            spins[i] = 1 if u < 0.5 else -1
        for t in range(sweeps):
            for i in range(n):
                local = h[i]
                for k in range(indptr[i], indptr[i + 1]):
                    local += weights[k] * spins[indices[k]]
                de = -2.0 * spins[i] * local
                state, u = _uniform(state)
                if de <= 0.0 or u < np.exp(-beta[t, i] * de):
                    spins[i] = -spins[i]
        for i in range(n):
            out_spins[r, i] = spins[i]


def _beta_table(config, free):
    s = (np.arange(config.sweeps) / max(1, config.sweeps - 1))
    dc = np.array([config.offsets.get(q, 0.0) for q in free])
    prog = np.clip(s[:, None] + config.offset_scale * dc[None, :], 0.0, 1.0)
    ratio = config.beta_end / config.beta_start
    return config.beta_start * ratio ** prog


def sample_sa(model, config: AnnealConfig) -> SampleSet:
    """Simulated annealing with per-qubit anneal offsets and flux pinning."""
    config.validate()
    free, h, off, indptr, indices, weights, pairs = _reduced_arrays(model)
    n = len(free)
    if n == 0:
        raise ValueError("model has no free qubits to sample")
    h_dyn = h.copy()
    for q, target in model.flux_biases.items():
        if q in model.clamped:
            continue
        h_dyn[free.index(q)] -= config.flux_strength * target
    beta = _beta_table(config, free)
    out = np.empty((config.num_reads, n), dtype=np.int8)
    _sa_kernel(h_dyn, indptr, indices, weights, beta,
               np.uint64(config.master_seed & 0xFFFFFFFFFFFFFFFF),
               config.num_reads, out)
    energies = _energies_for(out, h, off, pairs)
    return _aggregate(free, out, energies, config.num_reads,
                      model_digest=model.digest(), config_digest=config.digest())


def _energies_for(spins, h, off, pairs):
    e = spins @ h + off
    for (i, j), v in pairs.items():
        e += v * spins[:, i] * spins[:, j]
    return e


def _aggregate(free, spins, energies, num_reads, model_digest="",
               config_digest=""):
    seen = {}
    order = []
    for r in range(spins.shape[0]):
        key = spins[r].tobytes()
        if key in seen:
            seen[key][2] += 1
        else:
            seen[key] = [tuple(int(x) for x in spins[r]), float(energies[r]), 1]
            order.append(key)
    samples = sorted((seen[k] for k in order),
                     key=lambda s: (s[1], s[0]))
    return SampleSet(qubit_order=tuple(free),
                     samples=[tuple(s) for s in samples],
                     num_reads=num_reads, model_digest=model_digest,
                     config_digest=config_digest)


@njit(cache=True)
def _exact_kernel(h, indptr, indices, weights, limit):
    n = h.shape[0]
    spins = np.full(n, np.int8(-1))
    local = h.copy()
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            local[i] += weights[k] * spins[indices[k]]
    energy = 0.0
    for i in range(n):
        energy += 0.5 * (h[i] + local[i]) * spins[i]
    best = energy
    total = np.int64(1) << np.int64(n)
    # pass 1: minimum energy by Gray-code walk
    e = energy
    g_prev = np.int64(0)
    for step in range(1, total):
        gray = step ^ (step >> 1)
        diff = gray ^ g_prev
        b = 0
        while (diff >> b) & 1 == 0:
            b += 1
        g_prev = np.int64(gray)
        e += -2.0 * spins[b] * local[b]
        spins[b] = -spins[b]
        for k in range(indptr[b], indptr[b + 1]):
            local[indices[k]] += 2.0 * weights[k] * spins[b]
        if e < best:
            best = e
    # pass 2: collect all states within tolerance of the minimum
    for i in range(n):
        spins[i] = -1
    local = h.copy()
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            local[i] += weights[k] * spins[indices[k]]
    e = energy
    hits = np.empty((limit, n), dtype=np.int8)
    count = 0
    if e <= best + 1e-9:
        hits[count] = spins
        count += 1
    g_prev = np.int64(0)
    for step in range(1, total):
        gray = step ^ (step >> 1)
        diff = gray ^ g_prev
        b = 0
        while (diff >> b) & 1 == 0:
            b += 1
        g_prev = np.int64(gray)
        e += -2.0 * spins[b] * local[b]
        spins[b] = -spins[b]
        for k in range(indptr[b], indptr[b + 1]):
            local[indices[k]] += 2.0 * weights[k] * spins[b]
        if e <= best + 1e-9 and count < limit:
            hits[count] = spins
            count += 1
    return best, hits, count


def sample_exact(model, limit: int = 1 << 16) -> SampleSet:
    """All global minima of the model by exhaustive enumeration."""
    free, h, off, indptr, indices, weights, pairs = _reduced_arrays(model)
    n = len(free)
    if n > EXACT_LIMIT:
        raise TooManyQubitsError(
            f"{n} free qubits exceed the exact-enumeration limit {EXACT_LIMIT}")
    if n == 0:
        raise ValueError("model has no free qubits")
    best, hits, count = _exact_kernel(h, indptr, indices, weights, limit)
    if count >= limit:
        raise TooManyQubitsError(
            f"more than {limit} degenerate ground states")
    spins = hits[:count]
    energies = _energies_for(spins, h, off, pairs)
    ss = _aggregate(free, spins, energies, count, model_digest=model.digest(),
                    config_digest="exact")
    return ss

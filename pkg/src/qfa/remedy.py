"""Incremental anneal-offset remedy loop.

Each iteration samples the model, stops if a ground state appeared, and
otherwise advances the annealing schedule of all eight qubits of the
most-excited cell by a fixed offset increment, on top of the accumulated
history.  The loop halts at a step threshold, by default the perimeter
2(n+m) of the embedded multiplier.  Offsets change only the sampling
dynamics; the energy function is untouched throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .diagnostics import ENERGY_TOL, excitation_stats, most_excited
from .multiplier import MultiplierLayout
from .sampler import MAX_ABS_OFFSET, AnnealConfig, sample_sa


@dataclass
class RemedyResult:
    history: list
    reached_ground: bool
    iterations_used: int
    final_offsets: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "reached_ground": self.reached_ground,
            "iterations_used": self.iterations_used,
            "final_offsets": {str(q): v for q, v in sorted(self.final_offsets.items())},
            "warnings": self.warnings,
            "history": self.history,
        }, indent=1)


def default_threshold(layout: MultiplierLayout) -> int:
    """Step cap: the perimeter of the embedded multiplier."""
    return 2 * (layout.n + layout.m)


def _iteration_seed(master_seed: int, iteration: int) -> int:
    return (master_seed * 0x9E3779B97F4A7C15 + (iteration + 1) * 0xD1B54A32D192ED03) % (1 << 63)


def remedy_loop(layout: MultiplierLayout, model, base_config: AnnealConfig,
                delta: float = 0.01, threshold: int = None) -> RemedyResult:
    """Advance the most-excited cell's qubits by `delta` per step until a
    ground state is sampled or the step threshold is reached."""
    if delta <= 0:
        raise ValueError("offset increment must be positive")
    if threshold is None:
        threshold = default_threshold(layout)
    if threshold < 1:
        raise ValueError("threshold must be >= 1")

    steps = {}         # qubit -> number of delta increments
    history = []
    warnings = []
    reached = False
    iterations = 0
    for it in range(threshold + 1):
        offsets = {}
        for q, k in steps.items():
            value = k * delta
            if value > MAX_ABS_OFFSET:
                value = MAX_ABS_OFFSET
                msg = f"offset on qubit {q} clamped to {MAX_ABS_OFFSET} at iteration {it}"
                if msg not in warnings:
                    warnings.append(msg)
            offsets[q] = value
        config = replace(base_config, offsets=offsets,
                         master_seed=_iteration_seed(base_config.master_seed, it))
        sampleset = sample_sa(model, config)
        best = sampleset.lowest_energy()
        report = excitation_stats(layout, model, sampleset)
        target = most_excited(report)
        entry = {
            "iteration": it,
            "seed": config.master_seed,
            "best_energy": best,
            "most_excited": list(target),
            "excitation_count": report.per_cfa[target],
            "offsets": {str(q): v for q, v in sorted(offsets.items())},
        }
        if abs(best) <= ENERGY_TOL:
            entry["target"] = None
            history.append(entry)
            reached = True
            iterations = it
            break
        if it == threshold:
            entry["target"] = None
            history.append(entry)
            iterations = it
            break
        entry["target"] = list(target)
        history.append(entry)
        col, row = target
        for q in layout.tile(row, col).qubits:
            steps[q] = steps.get(q, 0) + 1
        iterations = it + 1
    final = {q: min(k * delta, MAX_ABS_OFFSET) for q, k in steps.items()}
    return RemedyResult(history=history, reached_ground=reached,
                        iterations_used=iterations, final_offsets=final,
                        warnings=warnings)

"""Prime factorization on a simulated quantum annealer.

Pipeline: gap-maximized penalty functions for controlled full-adder cells,
a modular Ising encoding of binary multipliers onto a Pegasus-style
topology, four qubit-initialization strategies, exact and simulated
annealing samplers with per-qubit anneal offsets, excitation diagnostics,
and the incremental anneal-offset remedy loop.
"""

from .topology import (HardwareGraph, PegasusCoord, TileAssignment,
                       build_pegasus, place_tiles, validate_model)
from .penalty import (BooleanSpec, PenaltyFunction, VerificationResult,
                      build_specialized_library, cfa_spec, specialize,
                      synthesize_penalty, verify_penalty)
from .multiplier import (InitMethod, IsingModel, MultiplierLayout,
                         apply_problem, binary_spins, build_multiplier,
                         circuit_assignment)
from .sampler import (AnnealConfig, SampleSet, evaluate_energy, sample_exact,
                      sample_sa)
from .diagnostics import (ExcitationReport, FactorCandidate, decode,
                          excitation_stats)
from .remedy import RemedyResult, remedy_loop

__all__ = [
    "AnnealConfig", "BooleanSpec", "ExcitationReport", "FactorCandidate",
    "HardwareGraph", "InitMethod", "IsingModel", "MultiplierLayout",
    "PegasusCoord", "PenaltyFunction", "RemedyResult", "SampleSet",
    "TileAssignment", "VerificationResult", "apply_problem", "binary_spins",
    "build_multiplier", "build_pegasus", "build_specialized_library",
    "cfa_spec", "circuit_assignment", "decode", "evaluate_energy",
    "excitation_stats", "place_tiles", "remedy_loop", "sample_exact",
    "sample_sa", "specialize", "synthesize_penalty", "validate_model",
    "verify_penalty",
]

__version__ = "0.1.0"

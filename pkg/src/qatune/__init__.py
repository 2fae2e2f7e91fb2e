"""Classical emulation of a Chimera-topology quantum-annealing pipeline.

Ising problems, hardware graphs, minor-embedding, control-error modelling,
a simulated-annealing stand-in for the annealer, postprocessing, benchmark
generators, an exhaustive oracle and ST99 metrics.
"""

from .chimera import ChimeraGraph, build_chimera, choi_clique_embedding
from .embedding import Embedding, embed, find_embedding, unembed
from .exact import brute_force, energy_gap, ground_state
from .ice import IceModel, perturb, sigma_E, success_band
from .ising import Hamiltonian, apply_gauge, energy, gauge_state, scale_to_unit
from .metrics import SuccessCriterion, percentiles, st99, st99_time, success_prob
from .postprocess import greedy_descent, postprocess_pipeline
from .sampler import AnnealerConfig, SampleSet, chain_shim, run, total_time

__version__ = "0.1.0"

__all__ = [
    "AnnealerConfig", "ChimeraGraph", "Embedding", "Hamiltonian", "IceModel", "SampleSet",
    "SuccessCriterion", "apply_gauge", "brute_force", "build_chimera", "chain_shim",
    "choi_clique_embedding", "embed", "energy", "energy_gap", "find_embedding", "gauge_state",
    "greedy_descent", "ground_state", "percentiles", "perturb", "postprocess_pipeline", "run",
    "scale_to_unit", "sigma_E", "st99", "st99_time", "success_band", "success_prob",
    "total_time", "unembed",
]

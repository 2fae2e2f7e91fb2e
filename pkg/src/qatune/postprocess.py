"""Classical repair of sampled states: chain majority vote and greedy descent."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .embedding import Embedding, unembed_states
from .errors import ConfigError, DimensionError
from .ising import Hamiltonian, energies
from .sampler import SampleSet

STAGES = ("majority_vote", "descent_embedded", "descent_logical")


def _descent_tolerance(H: Hamiltonian) -> float:
    # a flip must beat rounding noise to count as strictly improving
    return 1e-12 * (1.0 + float(np.abs(H.h).sum()) + float(np.abs(H.edge_weights).sum()))


def descend_states(H: Hamiltonian, states, seeds, workers: int = 1) -> np.ndarray:
    """Greedy descent applied to every row of ``states`` (copied), one seed per row."""
    S = np.array(np.atleast_2d(states), dtype=np.int8, copy=True)
    if S.shape[1] != H.n:
        raise DimensionError(f"states have width {S.shape[1]}, Hamiltonian has {H.n} spins")
    seeds = np.asarray(seeds, dtype=np.uint32)
    if len(seeds) != len(S):
        raise ValueError("need exactly one seed per state")
    indptr, indices, weights = H.csr()
    h = np.ascontiguousarray(H.h)
    tol = _descent_tolerance(H)
    if workers <= 1 or len(S) < 2 * workers:
        _kernels.descent_batch(h, indptr, indices, weights, S, seeds, tol)
        return S
    bounds = np.linspace(0, len(S), workers + 1).astype(int)
    parts = [S[bounds[i]:bounds[i + 1]] for i in range(workers)]

    def work(i):
        _kernels.descent_batch(h, indptr, indices, weights, parts[i], seeds[bounds[i]:bounds[i + 1]], tol)

    with ThreadPoolExecutor(workers) as pool:
        list(pool.map(work, range(workers)))
    return S


def greedy_descent(H: Hamiltonian, s, rng: np.random.Generator) -> np.ndarray:
    """Walk ``s`` to a single-flip local minimum using strictly improving flips.

    Spins are visited in a fresh random order each sweep; zero-gain flips are
    never taken. The input is not modified.
    """
    seed = rng.integers(0, 2**32, dtype=np.uint32)
    return descend_states(H, np.asarray(s, dtype=np.int8)[None, :], [seed])[0]


def is_local_minimum(H: Hamiltonian, s) -> bool:
    """True when no single spin flip strictly lowers the energy."""
    s = np.asarray(s, dtype=np.float64)
    f = H.h.copy()
    if len(H.J):
        u, v = H.edge_index.T
        np.add.at(f, u, H.edge_weights * s[v])
        np.add.at(f, v, H.edge_weights * s[u])
    return bool(np.all(-2.0 * s * f >= -_descent_tolerance(H)))


@dataclass(frozen=True)
class ProcessedSamples:
    """Raw reads next to their postprocessed counterparts.

    ``states``/``energies`` live in the space of the problem being solved:
    the logical problem when an embedding is involved, the hardware problem
    otherwise. Records rejected by chain discarding carry energy ``+inf``.
    ``raw_energies`` are the unprocessed reads scored the same way, with
    broken chains discarded.

    Attributes:
        raw: the input sample set (hardware reads).
        stages: stages applied, in order.
        hardware_states: hardware reads after the embedded-space stages.
        states: final solution states.
        energies: energy of each final state under the solved problem.
        accepted: records that produced a solution.
        raw_energies: baseline energies of the unprocessed reads.
    """

    raw: SampleSet
    stages: tuple[str, ...]
    hardware_states: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    accepted: np.ndarray
    raw_energies: np.ndarray

    def __len__(self):
        return len(self.energies)


def _score(H: Hamiltonian, states: np.ndarray, accepted: np.ndarray) -> np.ndarray:
    e = np.full(len(states), np.inf)
    if accepted.any():
        e[accepted] = energies(H, states[accepted])
    return e


def postprocess_pipeline(sample_set: SampleSet, stages, *, hardware: Hamiltonian,
                         embedding: Embedding | None = None, logical: Hamiltonian | None = None,
                         seed=0, workers: int = 1) -> ProcessedSamples:
    """Apply ``stages`` in order to every record of ``sample_set``.

    Stages:
        ``majority_vote``: resolve each chain to its majority spin (ties at
        random), moving records into logical space.
        ``descent_embedded``: greedy descent on the hardware problem; only
        allowed before the records leave hardware space.
        ``descent_logical``: greedy descent on the logical problem. If no
        majority vote preceded it, records with broken chains are discarded.

    Args:
        hardware: the Hamiltonian that was sampled.
        embedding: chain layout, required by the logical stages.
        logical: the logical problem, required by the logical stages.
        seed: base of the per-record random streams.

    Raises:
        ConfigError: unknown stage, a logical stage without embedding and
            logical problem, or ``descent_embedded`` after leaving hardware
            space.
    """
    stages = tuple(stages)
    for st in stages:
        if st not in STAGES:
            raise ConfigError(f"unknown postprocessing stage {st!r}; choose from {', '.join(STAGES)}")
    embedded = embedding is not None
    if embedded and logical is None:
        raise ConfigError("an embedding was given without its logical problem")
    if not embedded and any(st != "descent_embedded" for st in stages):
        raise ConfigError("majority_vote and descent_logical need an embedding and a logical problem")
    k = len(sample_set)
    hw = np.array(sample_set.states, dtype=np.int8, copy=True)
    if hw.shape[1] != hardware.n:
        raise DimensionError(f"samples have width {hw.shape[1]}, hardware problem has {hardware.n} spins")

    if embedded:
        raw_logical, raw_ok = unembed_states(hw, embedding, "discard")
        raw_energies = _score(logical, raw_logical, raw_ok)
    else:
        raw_energies = energies(hardware, hw)

    logical_states = None
    accepted = np.ones(k, dtype=bool)
    for idx, st in enumerate(stages):
        stream = np.random.SeedSequence([int(seed), idx])
        if st == "descent_embedded":
            if logical_states is not None:
                raise ConfigError("descent_embedded must come before any logical-space stage")
            hw = descend_states(hardware, hw, stream.generate_state(k), workers)
        elif st == "majority_vote":
            if logical_states is not None:
                raise ConfigError("majority_vote applies to hardware reads and may appear once")
            logical_states, accepted = unembed_states(hw, embedding, "majority_vote", np.random.default_rng(stream))
        else:
            if logical_states is None:
                logical_states, accepted = unembed_states(hw, embedding, "discard")
            seeds = stream.generate_state(k)
            out = logical_states.copy()
            if accepted.any():
                out[accepted] = descend_states(logical, logical_states[accepted], seeds[accepted], workers)
            logical_states = out

    if embedded:
        if logical_states is None:
            logical_states, accepted = unembed_states(hw, embedding, "discard")
        final, final_e = logical_states, _score(logical, logical_states, accepted)
    else:
        final, final_e = hw, energies(hardware, hw)
    return ProcessedSamples(sample_set, stages, hw, final, final_e, accepted, raw_energies)

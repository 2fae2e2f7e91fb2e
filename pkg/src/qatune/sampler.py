"""The annealer pipeline: programming, annealing, readout and resampling.

The physical anneal is replaced by classical Metropolis simulated annealing;
everything around it (gauge transformations, one ICE draw per programming
cycle, per-read RNG streams, time accounting) follows the hardware pipeline.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError
from .ice import IceModel, perturb, perturb_transient
from .ising import Hamiltonian, apply_gauge, energies, gauge_states

logger = logging.getLogger(__name__)

V7_T_P = 30e-3
V7_T_F = 20e-6
V7_T_S = 116e-6


@dataclass(frozen=True)
class AnnealerConfig:
    """Timing and proxy-annealer parameters.

    Sweeps scale linearly with anneal time: ``t_f == min_t_f`` gives
    ``sweeps_per_min_anneal`` Metropolis sweeps. Inverse temperatures follow
    a geometric schedule from ``beta_initial`` to ``beta_final``.
    """

    t_p: float = V7_T_P
    t_f: float = V7_T_F
    t_s: float = V7_T_S
    min_t_f: float = V7_T_F
    sweeps_per_min_anneal: int = 10
    beta_initial: float = 0.1
    beta_final: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if min(self.t_p, self.t_f, self.t_s, self.min_t_f) <= 0:
            raise ConfigError("all times must be positive")
        if self.t_f < self.min_t_f * (1 - 1e-12):
            raise ConfigError(f"anneal time {self.t_f} is below the platform floor {self.min_t_f}")
        if self.sweeps_per_min_anneal < 1:
            raise ConfigError("sweeps_per_min_anneal must be >= 1")
        if not 0 < self.beta_initial <= self.beta_final:
            raise ConfigError("need 0 < beta_initial <= beta_final")

    @property
    def sweeps(self) -> int:
        return max(1, int(round(self.sweeps_per_min_anneal * self.t_f / self.min_t_f)))

    def betas(self, sweeps: int | None = None) -> np.ndarray:
        return beta_schedule(self.beta_initial, self.beta_final, sweeps or self.sweeps)

    def with_anneal_time(self, t_f: float) -> "AnnealerConfig":
        return replace(self, t_f=t_f)


def beta_schedule(beta_initial: float, beta_final: float, sweeps: int) -> np.ndarray:
    if sweeps == 1:
        return np.array([beta_final])
    return np.geomspace(beta_initial, beta_final, sweeps)


def total_time(k: int, p: int, config: AnnealerConfig) -> float:
    """Wall time for ``k`` reads over ``p`` programming cycles: ``p t_p + k (t_f + t_s)``."""
    if k < 1 or p < 1:
        raise ValueError("k and p must be >= 1")
    return p * config.t_p + k * (config.t_f + config.t_s)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Reads returned by :func:`run`, already mapped back through their gauge.

    ``energies`` are evaluated against the nominal (unperturbed, ungauged)
    Hamiltonian.
    """

    states: np.ndarray
    energies: np.ndarray
    gauge_index: np.ndarray
    read_index: np.ndarray
    gauges: np.ndarray
    accounted_time: float
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.energies)

    @property
    def p(self) -> int:
        return len(self.gauges)

    def __len__(self):
        return self.k

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for a in (self.states, self.energies, self.gauge_index, self.read_index, self.gauges):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


class Backend(Protocol):
    """Anything that can anneal a programmed Hamiltonian ``reads`` times."""

    def sample(self, H: Hamiltonian, reads: int, stream: Sequence[int], config: AnnealerConfig) -> np.ndarray:
        ...


class SimulatedAnnealingBackend:
    """Metropolis SA proxy. Reads are independent and may run on ``workers`` threads."""

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))

    def sample(self, H, reads, stream, config):
        seeds = read_seeds(stream, reads)
        return anneal_many(H, config.betas(), seeds, self.workers)


def read_seeds(stream: Sequence[int], reads: int) -> np.ndarray:
    """One 32-bit seed per read; entry ``r`` depends only on ``stream`` and ``r``."""
    return np.random.SeedSequence(list(stream)).generate_state(reads, dtype=np.uint32)


def anneal_many(H: Hamiltonian, betas: np.ndarray, seeds: np.ndarray, workers: int = 1) -> np.ndarray:
    indptr, indices, weights = H.csr()
    h = np.ascontiguousarray(H.h)
    out = np.empty((len(seeds), H.n), dtype=np.int8)
    betas = np.ascontiguousarray(betas, dtype=np.float64)
    if workers <= 1 or len(seeds) < 2 * workers:
        _kernels.anneal_batch(h, indptr, indices, weights, betas, seeds, out)
        return out
    bounds = np.linspace(0, len(seeds), workers + 1).astype(int)

    def work(i):
        a, b = bounds[i], bounds[i + 1]
        _kernels.anneal_batch(h, indptr, indices, weights, betas, seeds[a:b], out[a:b])

    with ThreadPoolExecutor(workers) as pool:
        list(pool.map(work, range(workers)))
    return out


def anneal_once(H: Hamiltonian, sweeps: int, rng: np.random.Generator,
                beta_initial: float = 0.1, beta_final: float = 10.0) -> np.ndarray:
    """A single SA read from a uniform random start through ``sweeps`` sweeps."""
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    seed = rng.integers(0, 2**32, dtype=np.uint32)
    betas = beta_schedule(beta_initial, beta_final, sweeps)
    return anneal_many(H, betas, np.array([seed], dtype=np.uint32))[0]


def split_reads(k: int, p: int) -> list[int]:
    base, extra = divmod(k, p)
    return [base + (1 if i < extra else 0) for i in range(p)]


def run(H: Hamiltonian, k: int, p: int, config: AnnealerConfig, ice: IceModel | None = None, *,
        gauges=None, h_bias=None, backend: Backend | None = None, workers: int = 1) -> SampleSet:
    """Draw ``k`` reads of ``H`` split over ``p`` gauge-transformed programmings.

    For gauge ``i``: the programmed problem is ``apply_gauge(H, g_i)`` plus
    one persistent ICE draw (index ``i``) plus the systematic ``h_bias``,
    which lives in the hardware frame and is therefore not gauged. Reads are
    mapped back with ``g_i``. With ``p == 1`` and no explicit gauges the
    identity gauge is used.

    Args:
        gauges: optional explicit ``(p, n)`` gauge vectors.
        h_bias: scalar or per-qubit systematic field added at programming.
        backend: annealing backend; defaults to the SA proxy.
        workers: threads for the default backend.
    """
    if p < 1 or k < 1:
        raise ValueError("k and p must be >= 1")
    if p > k:
        raise ValueError(f"cannot spread {k} reads over {p} gauges")
    ice = ice or IceModel.off()
    backend = backend or SimulatedAnnealingBackend(workers)
    n = H.n
    if gauges is None:
        if p == 1:
            G = np.ones((1, n), dtype=np.int8)
        else:
            rng = np.random.default_rng([config.seed, 0x9A06E])
            G = rng.choice(np.array([-1, 1], dtype=np.int8), size=(p, n))
    else:
        G = np.asarray(gauges, dtype=np.int8).reshape(-1, n)
        if len(G) != p:
            raise ValueError(f"got {len(G)} gauges for p={p}")
    bias = np.zeros(n) if h_bias is None else np.broadcast_to(np.asarray(h_bias, dtype=np.float64), (n,))

    per_gauge = split_reads(k, p)
    states, gidx, ridx = [], [], []
    for i, (g, reads) in enumerate(zip(G, per_gauge)):
        programmed = perturb(apply_gauge(H, g), ice, draw_index=i)
        if bias.any():
            programmed = programmed.with_fields(programmed.h + bias)
        stream = (config.seed, i)
        if ice.has_transient:
            raw = np.concatenate([
                backend.sample(perturb_transient(programmed, ice, i, r), 1, (*stream, r), config)
                for r in range(reads)
            ])
        else:
            raw = backend.sample(programmed, reads, stream, config)
        states.append(gauge_states(g, raw))
        gidx.append(np.full(reads, i, dtype=np.int64))
        ridx.append(np.arange(reads, dtype=np.int64))
    S = np.concatenate(states)
    return SampleSet(
        states=S,
        energies=energies(H, S),
        gauge_index=np.concatenate(gidx),
        read_index=np.concatenate(ridx),
        gauges=G,
        accounted_time=total_time(k, p, config),
        meta={"sweeps": config.sweeps, "t_f": config.t_f},
    )


# -- chain shimming ---------------------------------------------------------


@dataclass(frozen=True)
class ShimResult:
    """Outcome of :func:`chain_shim`.

    ``biases`` are per-qubit compensating fields (compact embedding order,
    scaled problem units). ``polarization[t]`` holds the per-chain mean spin
    measured before update ``t``; the last row is measured with the final
    biases. NaN marks a chain with no unbroken read.
    """

    biases: np.ndarray
    polarization: np.ndarray
    converged: bool

    @property
    def initial(self) -> np.ndarray:
        return self.polarization[0]

    @property
    def final(self) -> np.ndarray:
        return self.polarization[-1]


def chain_polarization(states: np.ndarray, emb) -> np.ndarray:
    """Mean logical spin of each chain over reads where that chain is unbroken."""
    from .embedding import chain_sums

    sums = chain_sums(states, emb)
    sizes = np.asarray(emb.chain_sizes)
    intact = np.abs(sums) == sizes
    spins = np.sign(sums)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(intact.any(axis=0), (spins * intact).sum(axis=0) / intact.sum(axis=0), np.nan)


def chain_shim(emb, kappa: float, config: AnnealerConfig, ice: IceModel | None = None,
               iterations: int = 5, step: float = 0.05, *, reads: int = 1000, h_bias=None,
               scale: float | None = None, tolerance: float | None = None) -> ShimResult:
    """Calibrate compensating fields so every chain is unbiased under ``(0, J_chain)``.

    Each iteration samples the chain-only Hamiltonian with the current
    compensation, measures each chain's polarization ``m_i`` and adds
    ``step * m_i`` to the field of every qubit in chain ``i``: with energy
    ``+h s``, a chain leaning to ``+1`` gets a positive field pushing it back.

    Args:
        kappa: chain strength; couplers sit at ``-kappa * scale``.
        scale: problem scale; defaults to ``1/kappa`` (unit-scaled chains).
        h_bias: systematic field present on the hardware (to be cancelled).
        tolerance: stop early once every ``|m_i|`` is below this value.
    """
    from .embedding import chain_spanning_edges

    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    scale = 1.0 / kappa if scale is None else scale
    pos = emb.position
    J = {}
    for i in emb.chains:
        for u, v in chain_spanning_edges(emb, i):
            a, b = pos[u], pos[v]
            J[(min(a, b), max(a, b))] = -kappa * scale
    H_chain = Hamiltonian(np.zeros(emb.num_qubits), J)
    chain_of = emb.chain_of
    biases = np.zeros(emb.num_qubits)
    history = []
    converged = False
    for t in range(iterations + 1):
        cfg = replace(config, seed=int(np.random.SeedSequence([config.seed, t]).generate_state(1)[0]))
        # each measurement is a fresh programming, hence a fresh ICE draw
        ice_t = None if ice is None else replace(ice, seed=int(np.random.SeedSequence([ice.seed, t]).generate_state(1)[0]))
        bias = biases if h_bias is None else biases + h_bias
        ss = run(H_chain, reads, 1, cfg, ice_t, h_bias=bias)
        m = chain_polarization(ss.states, emb)
        history.append(m)
        if tolerance is not None and np.all(np.nan_to_num(np.abs(m)) < tolerance):
            converged = True
            break
        if t == iterations:
            break
        biases = biases + step * np.nan_to_num(m)[chain_of]
    if not converged:
        logger.debug("chain shim stopped after %d iterations, max |m| = %.3f",
                     iterations, float(np.nanmax(np.abs(history[-1])) if len(history[-1]) else 0.0))
    return ShimResult(biases, np.array(history), converged)

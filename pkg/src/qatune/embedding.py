"""Minor-embedding of logical Ising problems into Chimera hardware graphs.

Hardware states of an embedded problem are indexed compactly: position ``i``
of a hardware spin vector refers to qubit ``embedding.qubits[i]``, the
sorted union of all chains. Qubits outside the chains play no role.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .chimera import ChimeraGraph
from .errors import DegenerateInputError, EmbeddingMismatchError, ParseError
from .ising import Hamiltonian, scale_to_unit

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Map from logical variables ``0..source_n-1`` to chains of qubits.

    Validity (disjoint, connected chains that realise every logical edge) is
    not enforced on construction; see :func:`embedding_problems`.
    """

    chains: dict[int, tuple[int, ...]]
    source_n: int
    target: ChimeraGraph

    def __post_init__(self):
        chains = {int(i): tuple(sorted(int(q) for q in c)) for i, c in self.chains.items()}
        if sorted(chains) != list(range(self.source_n)):
            raise ValueError("chains must cover logical variables 0..source_n-1 exactly")
        if any(len(c) == 0 for c in chains.values()):
            raise ValueError("every chain must be nonempty")
        object.__setattr__(self, "chains", dict(sorted(chains.items())))

    @cached_property
    def qubits(self) -> tuple[int, ...]:
        return tuple(sorted(q for c in self.chains.values() for q in c))

    @cached_property
    def position(self) -> dict[int, int]:
        """Hardware qubit id -> compact index."""
        return {q: i for i, q in enumerate(self.qubits)}

    @cached_property
    def chain_of(self) -> np.ndarray:
        """Compact index -> logical variable."""
        out = np.empty(len(self.qubits), dtype=np.int64)
        for i, chain in self.chains.items():
            for q in chain:
                out[self.position[q]] = i
        return out

    @cached_property
    def chain_positions(self) -> list[np.ndarray]:
        return [np.array([self.position[q] for q in self.chains[i]]) for i in range(self.source_n)]

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    @property
    def chain_sizes(self) -> list[int]:
        return [len(self.chains[i]) for i in range(self.source_n)]

    def __eq__(self, other):
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.chains == other.chains and self.source_n == other.source_n and self.target == other.target

    def __hash__(self):
        return hash((tuple(self.chains.items()), self.source_n))


def _source_edges(source) -> tuple[int, list[tuple[int, int]]]:
    if isinstance(source, Hamiltonian):
        return source.n, [tuple(map(int, e)) for e in source.edge_index]
    if isinstance(source, nx.Graph):
        n = source.number_of_nodes()
        if sorted(source.nodes) != list(range(n)):
            raise ValueError("logical graph nodes must be 0..n-1")
        return n, [(min(u, v), max(u, v)) for u, v in source.edges]
    raise TypeError(f"expected Hamiltonian or networkx.Graph, got {type(source).__name__}")


def _inter_chain_couplers(emb: Embedding, i: int, j: int) -> list[tuple[int, int]]:
    adj = emb.target.adjacency
    cj = set(emb.chains[j])
    out = []
    for u in emb.chains[i]:
        for v in adj.get(u, ()):
            if v in cj:
                out.append((u, v))
    return sorted(out)


def embedding_problems(emb: Embedding, source_edges: Iterable[tuple[int, int]]) -> list[str]:
    """Every violated validity condition, as human-readable messages.

    An empty list means the chains are pairwise disjoint, each induces a
    connected subgraph of active qubits, and each logical edge has a coupler
    between its two chains.
    """
    problems = []
    target = emb.target
    owner: dict[int, int] = {}
    for i, chain in emb.chains.items():
        for q in chain:
            if q not in target.qubits:
                problems.append(f"chain {i} uses inactive qubit {q}")
            if q in owner:
                problems.append(f"qubit {q} shared by chains {owner[q]} and {i}")
            owner[q] = i
    for i, chain in emb.chains.items():
        members = set(chain)
        seen = {chain[0]}
        stack = [chain[0]]
        while stack:
            u = stack.pop()
            for v in target.adjacency.get(u, ()):
                if v in members and v not in seen:
                    seen.add(v)
                    stack.append(v)
        if seen != members:
            problems.append(f"chain {i} is disconnected")
    for i, j in source_edges:
        if not _inter_chain_couplers(emb, i, j):
            problems.append(f"no coupler between chains {i} and {j}")
    return problems


def is_valid_embedding(emb: Embedding, source) -> bool:
    _, edges = _source_edges(source)
    return not embedding_problems(emb, edges)


# -- heuristic embedder -----------------------------------------------------


class _Router:
    """Congestion-negotiated chain placement on a fixed target graph.

    A qubit costs ``(1 + history) * (1 + present * usage)``: ``usage`` counts
    other chains already on it, ``history`` accumulates past overuse so that
    contested qubits grow steadily more expensive across rounds.
    """

    def __init__(self, target: ChimeraGraph):
        self.nodes = np.array(sorted(target.qubits))
        self.index = {int(q): i for i, q in enumerate(self.nodes)}
        rows, cols = [], []
        for u, v in target.couplers:
            a, b = self.index[u], self.index[v]
            rows += [a, b]
            cols += [b, a]
        self.rows = np.array(rows, dtype=np.int64)
        self.cols = np.array(cols, dtype=np.int64)
        self.adj: list[list[int]] = [[] for _ in self.nodes]
        for a, b in zip(self.rows, self.cols):
            self.adj[a].append(int(b))

    def route(self, sources: list[list[int]], w: np.ndarray, rng) -> list[int]:
        m = len(self.nodes)
        if not sources:
            best = np.flatnonzero(w == w.min())
            return [int(rng.choice(best))]
        graph = csr_matrix((w[self.cols], (self.rows, self.cols)), shape=(m, m))
        cost = w.copy()
        preds = []
        for src in sources:
            dist, pred, _ = dijkstra(graph, directed=True, indices=src, min_only=True, return_predecessors=True)
            interior = dist - w
            interior[src] = np.inf
            cost += interior
            preds.append((set(src), pred))
        finite = np.isfinite(cost)
        if not finite.any():
            return []
        best = np.flatnonzero(cost <= cost[finite].min() * (1 + 1e-12))
        root = int(rng.choice(best))
        chain = {root}
        for src, pred in preds:
            node = root
            while node not in src:
                chain.add(node)
                node = int(pred[node])
                if node < 0:
                    return []
        return sorted(chain)


def find_embedding(source, target: ChimeraGraph, seed=None, max_tries: int = 10,
                   max_rounds: int = 64) -> Embedding | None:
    """Heuristically minor-embed a logical graph into ``target``.

    Each attempt places the logical vertices one at a time in random order,
    routing each new chain along node-weighted shortest paths to the chains
    of its already-placed neighbours. Chains may share qubits at first;
    every round then rips up and re-routes each chain while the price of
    shared qubits rises, until no qubit is used twice.

    Args:
        source: a :class:`Hamiltonian` or a ``networkx.Graph`` on ``0..n-1``.
        target: the hardware graph.
        seed: seeds the per-attempt random streams.
        max_tries: independent restarts before giving up.
        max_rounds: rip-up-and-reroute rounds per attempt.

    Returns:
        The first valid embedding by attempt index, or ``None`` when every
        attempt failed. Failure does not prove that no embedding exists.
    """
    n, edges = _source_edges(source)
    if n == 0:
        raise DegenerateInputError("logical graph has no vertices")
    if n > target.num_qubits:
        return None
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        nbrs[u].add(v)
        nbrs[v].add(u)
    router = _Router(target)
    attempt_seeds = np.random.SeedSequence(seed).spawn(max_tries)
    for attempt, ss in enumerate(attempt_seeds):
        rng = np.random.default_rng(ss)
        chains = _attempt(router, n, nbrs, rng, max_rounds)
        if chains is None:
            continue
        emb = Embedding({i: tuple(int(router.nodes[j]) for j in c) for i, c in chains.items()}, n, target)
        problems = embedding_problems(emb, edges)
        if not problems:
            logger.debug("embedding found on attempt %d using %d qubits", attempt, emb.num_qubits)
            return emb
        logger.debug("attempt %d produced invalid embedding: %s", attempt, problems[0])
    return None


def _prune(router: _Router, chain: list[int], x: int, chains, nbrs) -> list[int]:
    """Drop leaf qubits that neither connect the chain nor touch a needed neighbour."""
    members = set(chain)
    needed = [set(chains[y]) for y in nbrs[x] if y in chains]
    changed = True
    while changed and len(members) > 1:
        changed = False
        for q in sorted(members):
            inside = [v for v in router.adj[q] if v in members]
            if len(inside) != 1:
                continue
            rest = members - {q}
            if all(any(v in nb for r in rest for v in router.adj[r]) for nb in needed):
                members = rest
                changed = True
                break
    return sorted(members)


def _attempt(router: _Router, n: int, nbrs, rng, max_rounds: int):
    m = len(router.nodes)
    usage = np.zeros(m, dtype=np.int64)
    history = np.zeros(m)
    chains: dict[int, list[int]] = {}
    present = 1.0

    def place(x):
        w = (1.0 + history) * (1.0 + present * usage)
        srcs = [chains[y] for y in sorted(nbrs[x]) if y in chains]
        chain = router.route(srcs, w, rng)
        if not chain:
            return False
        chains[x] = chain
        usage[chain] += 1
        return True

    for x in rng.permutation(n):
        if not place(int(x)):
            return None
    for _ in range(max_rounds):
        if usage.max() <= 1:
            break
        history += np.maximum(usage - 1, 0)
        present *= 1.5
        for x in rng.permutation(n):
            x = int(x)
            usage[chains.pop(x)] -= 1
            if not place(x):
                return None
    if usage.max() > 1:
        return None
    for x in range(n):
        chains[x] = _prune(router, chains[x], x, chains, nbrs)
    return chains


# -- embedded problems ------------------------------------------------------


def chain_spanning_edges(emb: Embedding, i: int) -> list[tuple[int, int]]:
    """BFS spanning tree of chain ``i`` as sorted hardware-id pairs."""
    chain = emb.chains[i]
    members = set(chain)
    adj = emb.target.adjacency
    seen = {chain[0]}
    queue = deque([chain[0]])
    edges = []
    while queue:
        u = queue.popleft()
        for v in sorted(adj.get(u, ())):
            if v in members and v not in seen:
                seen.add(v)
                queue.append(v)
                edges.append((min(u, v), max(u, v)))
    return edges


@dataclass(frozen=True, eq=False)
class EmbeddedProblem:
    """A logical problem realised on hardware with chain strength ``kappa``.

    ``hardware`` is unit-scaled and indexed compactly over
    ``embedding.qubits``. ``J_problem`` and ``J_chain`` split its couplers
    (both already scaled by ``alpha``).
    """

    logical: Hamiltonian
    embedding: Embedding
    kappa: float
    hardware: Hamiltonian
    J_problem: dict[tuple[int, int], float]
    J_chain: dict[tuple[int, int], float]
    alpha: float = 1.0
    chain_edges: list[tuple[int, int]] = field(default_factory=list)

    @property
    def chain_offset(self) -> float:
        """Constant ``-kappa * (number of chain couplers)`` in unscaled units."""
        return -self.kappa * len(self.J_chain)

    def chain_hamiltonian(self) -> Hamiltonian:
        """The fields-free chain part ``(0, J_chain)``."""
        return Hamiltonian(np.zeros(self.hardware.n), self.J_chain)


def embed(H0: Hamiltonian, emb: Embedding, kappa: float) -> EmbeddedProblem:
    """Build the hardware problem for ``H0`` under ``emb`` with chain strength ``kappa``.

    Each logical coupling is placed on the lowest-numbered coupler joining
    the two chains, each logical field is split evenly over its chain, and
    chain qubits are bound by ``-kappa`` along a BFS spanning tree. The
    result is unit-scaled, so a larger ``kappa`` yields a smaller ``alpha``.

    Raises:
        EmbeddingMismatchError: some logical edge has no coupler between chains.
    """
    if kappa <= 0:
        raise ValueError(f"chain strength must be positive, got {kappa}")
    if H0.n != emb.source_n:
        raise EmbeddingMismatchError(f"problem has {H0.n} variables, embedding {emb.source_n}")
    pos = emb.position
    h = np.zeros(emb.num_qubits)
    for i, chain in emb.chains.items():
        share = H0.h[i] / len(chain)
        for q in chain:
            h[pos[q]] = share
    J_problem: dict[tuple[int, int], float] = {}
    for (i, j), w in H0.J.items():
        couplers = _inter_chain_couplers(emb, i, j)
        if not couplers:
            raise EmbeddingMismatchError(f"no coupler between chains {i} and {j}")
        a, b = pos[couplers[0][0]], pos[couplers[0][1]]
        key = (min(a, b), max(a, b))
        J_problem[key] = J_problem.get(key, 0.0) + w
    J_chain: dict[tuple[int, int], float] = {}
    chain_edges = []
    for i in emb.chains:
        for u, v in chain_spanning_edges(emb, i):
            a, b = pos[u], pos[v]
            J_chain[(min(a, b), max(a, b))] = -float(kappa)
            chain_edges.append((u, v))
    raw = Hamiltonian(h, {**J_problem, **J_chain})
    try:
        hardware = scale_to_unit(raw)
    except DegenerateInputError:
        hardware = Hamiltonian(h, raw.J, 1.0)
    alpha = hardware.scale_alpha
    return EmbeddedProblem(
        logical=H0,
        embedding=emb,
        kappa=float(kappa),
        hardware=hardware,
        J_problem={k: w * alpha for k, w in J_problem.items()},
        J_chain={k: w * alpha for k, w in J_chain.items()},
        alpha=alpha,
        chain_edges=chain_edges,
    )


# -- chains in samples ------------------------------------------------------


def _membership(emb: Embedding) -> np.ndarray:
    M = np.zeros((emb.num_qubits, emb.source_n), dtype=np.int64)
    M[np.arange(emb.num_qubits), emb.chain_of] = 1
    return M


def chain_sums(states, emb: Embedding) -> np.ndarray:
    S = np.atleast_2d(np.asarray(states, dtype=np.int64))
    if S.shape[1] != emb.num_qubits:
        raise ValueError(f"hardware states have width {S.shape[1]}, embedding uses {emb.num_qubits} qubits")
    return S @ _membership(emb)


def broken_mask(states, emb: Embedding) -> np.ndarray:
    """``(k, source_n)`` boolean: chain ``i`` of record ``r`` is broken."""
    sums = chain_sums(states, emb)
    return np.abs(sums) != np.asarray(emb.chain_sizes)


def broken_chains(s_hw, emb: Embedding) -> set[int]:
    """Logical variables whose chain spins are not unanimous in ``s_hw``."""
    return {int(i) for i in np.flatnonzero(broken_mask(s_hw, emb)[0])}


def unembed_states(states, emb: Embedding, policy: str = "discard", rng=None):
    """Map hardware states back to logical states.

    Returns:
        ``(logical, accepted)``: an int8 ``(k, source_n)`` array and a boolean
        mask. Under ``discard`` rows with a broken chain are rejected (their
        logical row is meaningless). Under ``majority_vote`` every row is
        accepted and ties are broken uniformly with ``rng``.
    """
    sums = chain_sums(states, emb)
    sizes = np.asarray(emb.chain_sizes)
    if policy == "discard":
        accepted = np.all(np.abs(sums) == sizes, axis=1)
        return np.where(sums >= 0, 1, -1).astype(np.int8), accepted
    if policy == "majority_vote":
        logical = np.sign(sums).astype(np.int8)
        ties = logical == 0
        if ties.any():
            rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
            logical[ties] = rng.choice(np.array([-1, 1], dtype=np.int8), size=int(ties.sum()))
        return logical, np.ones(len(logical), dtype=bool)
    raise ValueError(f"unknown unembedding policy {policy!r}")


def unembed(s_hw, emb: Embedding, policy: str = "discard", rng=None):
    """Single-state version of :func:`unembed_states`; ``None`` means rejected."""
    logical, accepted = unembed_states(np.atleast_2d(s_hw), emb, policy, rng)
    return logical[0] if accepted[0] else None


def embed_state(s_logical, emb: Embedding) -> np.ndarray:
    """Hardware state with every chain set to its logical spin."""
    s = np.asarray(s_logical, dtype=np.int8)
    return s[emb.chain_of]


# -- chain strength calibration ---------------------------------------------


@dataclass(frozen=True)
class Kappa0Estimate:
    kappa: float
    saturated: bool
    trace: tuple[tuple[float, bool], ...] = ()


def default_kappa_grid(cap: float = 10.0) -> list[float]:
    return [1.0 + 0.5 * i for i in range(int(round((cap - 1.0) / 0.5)) + 1)]


def estimate_kappa0(H0: Hamiltonian, emb: Embedding, config=None, grid=None, *, ice=None,
                    reads: int = 1000, gauges: int = 1, h_bias=None) -> Kappa0Estimate:
    """Smallest grid chain strength whose lowest-energy samples keep every chain intact.

    For each ``kappa`` in ``grid`` (increasing) the embedded problem is
    sampled ``reads`` times; ``kappa`` is accepted when every record at the
    minimum sampled energy has no broken chain. If no grid value qualifies,
    the last one is returned with ``saturated=True``.
    """
    from .sampler import AnnealerConfig, run

    grid = list(default_kappa_grid() if grid is None else grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
        raise ValueError("grid must be a nonempty increasing sequence of positive values")
    if all(size == 1 for size in emb.chain_sizes):
        return Kappa0Estimate(grid[0], False, ((grid[0], True),))
    config = config or AnnealerConfig()
    trace = []
    for kappa in grid:
        ep = embed(H0, emb, kappa)
        ss = run(ep.hardware, reads, gauges, config, ice, h_bias=h_bias)
        e_min = ss.energies.min()
        tol = 1e-9 * max(1.0, abs(e_min))
        lowest = ss.states[ss.energies <= e_min + tol]
        ok = not broken_mask(lowest, emb).any()
        trace.append((kappa, ok))
        if ok:
            return Kappa0Estimate(kappa, False, tuple(trace))
    return Kappa0Estimate(grid[-1], True, tuple(trace))


# -- embedding text format: one line "var: q1 q2 ..." per logical variable --


def format_embedding(emb: Embedding) -> str:
    return "".join(f"{i}: {' '.join(map(str, chain))}\n" for i, chain in emb.chains.items())


def parse_embedding(text: str, target: ChimeraGraph) -> Embedding:
    chains = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        var, sep, rest = line.partition(":")
        if not sep:
            raise ParseError(f"expected 'var: q1 q2 ...', got {line!r}", lineno)
        try:
            i = int(var)
            chain = tuple(int(q) for q in rest.split())
        except ValueError:
            raise ParseError(f"malformed entry {line!r}", lineno) from None
        if not chain:
            raise ParseError(f"empty chain for variable {i}", lineno)
        if i in chains:
            raise ParseError(f"variable {i} listed twice", lineno)
        chains[i] = chain
    try:
        return Embedding(chains, len(chains), target)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def write_embedding(emb: Embedding, path) -> None:
    Path(path).write_text(format_embedding(emb))


def read_embedding(path, target: ChimeraGraph) -> Embedding:
    return parse_embedding(Path(path).read_text(), target)

"""Chimera hardware graphs.

A C_k graph is a k x k grid of K_{4,4} cells. Qubit ids follow

    id = 8 * (k * row + col) + 4 * orientation + index

with orientation 0 (vertical: coupled to the same qubit in the cells above
and below) or 1 (horizontal: coupled to the cells left and right), and
index 0..3 within the half-cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import GraphValidationError, InfeasibleError, ParseError

VERTICAL = 0
HORIZONTAL = 1


def linear_index(k: int, row: int, col: int, orientation: int, index: int) -> int:
    return 8 * (k * row + col) + 4 * orientation + index


def coordinates(k: int, q: int) -> tuple[int, int, int, int]:
    """Inverse of :func:`linear_index`: ``(row, col, orientation, index)``."""
    cell, rem = divmod(q, 8)
    row, col = divmod(cell, k)
    orientation, index = divmod(rem, 4)
    return row, col, orientation, index


def _full_couplers(k: int) -> set[tuple[int, int]]:
    edges = set()
    for row in range(k):
        for col in range(k):
            for a in range(4):
                for b in range(4):
                    edges.add((linear_index(k, row, col, VERTICAL, a),
                               linear_index(k, row, col, HORIZONTAL, b)))
            for t in range(4):
                if row + 1 < k:
                    edges.add((linear_index(k, row, col, VERTICAL, t),
                               linear_index(k, row + 1, col, VERTICAL, t)))
                if col + 1 < k:
                    edges.add((linear_index(k, row, col, HORIZONTAL, t),
                               linear_index(k, row, col + 1, HORIZONTAL, t)))
    return edges


def is_chimera_edge(k: int, u: int, v: int) -> bool:
    """Whether ``(u, v)`` is a coupler of the full C_k."""
    if not (0 <= u < 8 * k * k and 0 <= v < 8 * k * k) or u == v:
        return False
    ru, cu, ou, iu = coordinates(k, u)
    rv, cv, ov, iv = coordinates(k, v)
    if (ru, cu) == (rv, cv):
        return ou != ov
    if ou != ov or iu != iv:
        return False
    if ou == VERTICAL:
        return cu == cv and abs(ru - rv) == 1
    return ru == rv and abs(cu - cv) == 1


@dataclass(frozen=True)
class ChimeraGraph:
    """A working subgraph of the full C_k.

    Attributes:
        k: grid dimension.
        qubits: active qubit ids.
        couplers: active couplers as sorted ``(u, v)`` pairs with ``u < v``.
    """

    k: int
    qubits: frozenset[int]
    couplers: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"grid dimension must be >= 1, got {self.k}")
        size = 8 * self.k * self.k
        for q in self.qubits:
            if not 0 <= q < size:
                raise GraphValidationError(f"qubit {q} outside C_{self.k}")
        for u, v in self.couplers:
            if u >= v:
                raise GraphValidationError(f"coupler ({u}, {v}) not in canonical order")
            if not is_chimera_edge(self.k, u, v):
                raise GraphValidationError(f"({u}, {v}) is not a C_{self.k} coupler")
            if u not in self.qubits or v not in self.qubits:
                raise GraphValidationError(f"coupler ({u}, {v}) references an inactive qubit")

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    @property
    def num_couplers(self) -> int:
        return len(self.couplers)

    @property
    def size(self) -> int:
        """Number of qubit ids in the full C_k."""
        return 8 * self.k * self.k

    @cached_property
    def adjacency(self) -> dict[int, frozenset[int]]:
        adj: dict[int, set[int]] = {q: set() for q in self.qubits}
        for u, v in self.couplers:
            adj[u].add(v)
            adj[v].add(u)
        return {q: frozenset(nb) for q, nb in adj.items()}

    def has_coupler(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.couplers

    def degree(self, q: int) -> int:
        return len(self.adjacency[q])

    def cell_of(self, q: int) -> tuple[int, int]:
        row, col, _, _ = coordinates(self.k, q)
        return row, col

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(sorted(self.qubits))
        G.add_edges_from(sorted(self.couplers))
        return G

    @property
    def is_full(self) -> bool:
        return self.num_qubits == self.size and self.num_couplers == 24 * self.k**2 - 8 * self.k


def build_chimera(k: int) -> ChimeraGraph:
    """The full C_k: 8k^2 qubits and 24k^2 - 8k couplers."""
    if k < 1:
        raise ValueError(f"grid dimension must be >= 1, got {k}")
    return ChimeraGraph(k, frozenset(range(8 * k * k)), frozenset(_full_couplers(k)))


def remove_qubits(graph: ChimeraGraph, dead) -> ChimeraGraph:
    dead = set(dead)
    qubits = graph.qubits - dead
    couplers = frozenset(e for e in graph.couplers if e[0] not in dead and e[1] not in dead)
    return ChimeraGraph(graph.k, frozenset(qubits), couplers)


def remove_couplers(graph: ChimeraGraph, dead) -> ChimeraGraph:
    dead = {(min(u, v), max(u, v)) for u, v in dead}
    return ChimeraGraph(graph.k, graph.qubits, graph.couplers - dead)


def random_yield(graph: ChimeraGraph, dead_qubits: int, seed) -> ChimeraGraph:
    """Drop a uniformly random set of ``dead_qubits`` qubits and their couplers."""
    if not 0 <= dead_qubits <= graph.num_qubits:
        raise ValueError(f"cannot remove {dead_qubits} of {graph.num_qubits} qubits")
    if dead_qubits == 0:
        return graph
    rng = np.random.default_rng(seed)
    pool = np.array(sorted(graph.qubits))
    dead = rng.choice(pool, size=dead_qubits, replace=False)
    return remove_qubits(graph, dead.tolist())


def synthesize_working_graph(k: int, num_qubits: int, num_couplers: int, seed) -> ChimeraGraph:
    """Random working graph of C_k with exact qubit and coupler counts.

    Qubits are removed one at a time, each drawn uniformly among the active
    qubits of currently lowest degree, so dead qubits cluster and few
    couplers are lost with them; surplus couplers are then removed uniformly.
    With ``k=8, num_qubits=481, num_couplers=1306`` this gives a graph with
    the V7 element counts (not its layout, which is not public).

    Raises:
        ValueError: the requested counts cannot be reached.
    """
    full = build_chimera(k)
    if not 0 < num_qubits <= full.num_qubits:
        raise ValueError(f"qubit count must lie in 1..{full.num_qubits}")
    qseed, cseed = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(qseed)
    degree = {q: full.degree(q) for q in full.qubits}
    adj = full.adjacency
    for _ in range(full.num_qubits - num_qubits):
        low = min(degree.values())
        pool = sorted(q for q, d in degree.items() if d == low)
        dead = pool[int(rng.integers(len(pool)))]
        del degree[dead]
        for v in adj[dead]:
            if v in degree:
                degree[v] -= 1
    g = remove_qubits(full, sorted(set(full.qubits) - set(degree)))
    surplus = g.num_couplers - num_couplers
    if surplus < 0:
        raise ValueError(
            f"only {g.num_couplers} couplers survive qubit removal; cannot reach {num_couplers}"
        )
    if surplus:
        rng = np.random.default_rng(cseed)
        edges = sorted(g.couplers)
        idx = rng.choice(len(edges), size=surplus, replace=False)
        g = remove_couplers(g, [edges[i] for i in idx])
    return g


# -- working-graph text format ------------------------------------------------
#
#   chimera k
#   q <id>           one per active qubit
#   c <id> <id>      one per active coupler


def format_working_graph(graph: ChimeraGraph) -> str:
    lines = [f"chimera {graph.k}"]
    lines += [f"q {q}" for q in sorted(graph.qubits)]
    lines += [f"c {u} {v}" for u, v in sorted(graph.couplers)]
    return "\n".join(lines) + "\n"


def load_working_graph(source: str) -> ChimeraGraph:
    """Parse a working-graph listing.

    Raises:
        ParseError: malformed lines.
        GraphValidationError: an element is not part of the declared C_k, or
            a coupler references an unlisted qubit.
    """
    k = None
    qubits: set[int] = set()
    couplers: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if k is None:
                if parts[0] != "chimera" or len(parts) != 2:
                    raise ParseError("expected 'chimera k' header", lineno)
                k = int(parts[1])
                if k < 1:
                    raise ParseError("grid dimension must be >= 1", lineno)
            elif parts[0] == "q" and len(parts) == 2:
                q = int(parts[1])
                if not 0 <= q < 8 * k * k:
                    raise GraphValidationError(f"line {lineno}: qubit {q} outside C_{k}")
                qubits.add(q)
            elif parts[0] == "c" and len(parts) == 3:
                u, v = sorted((int(parts[1]), int(parts[2])))
                if not is_chimera_edge(k, u, v):
                    raise GraphValidationError(f"line {lineno}: ({u}, {v}) is not a C_{k} coupler")
                couplers.add((u, v))
            else:
                raise ParseError(f"unrecognised entry {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, (ParseError, GraphValidationError)):
                raise
            raise ParseError(f"malformed entry {line!r}", lineno) from None
    if k is None:
        raise ParseError("missing 'chimera k' header")
    return ChimeraGraph(k, frozenset(qubits), frozenset(couplers))


def write_working_graph(graph: ChimeraGraph, path) -> None:
    Path(path).write_text(format_working_graph(graph))


def read_working_graph(path) -> ChimeraGraph:
    return load_working_graph(Path(path).read_text())


def choi_chains(k: int) -> dict[int, tuple[int, ...]]:
    """Chains of the native K_{4k} clique embedding in the upper triangle of C_k.

    Logical variable ``i = 4c + t`` uses the horizontal qubits of row ``c`` in
    columns ``c..k-1`` and the vertical qubits of column ``c`` in rows
    ``0..c``, all with in-cell index ``t``. The two arms meet in the diagonal
    cell ``(c, c)``, so each chain has ``k + 1`` qubits.
    """
    chains = {}
    for c in range(k):
        for t in range(4):
            horiz = [linear_index(k, c, col, HORIZONTAL, t) for col in range(c, k)]
            vert = [linear_index(k, row, c, VERTICAL, t) for row in range(0, c + 1)]
            chains[4 * c + t] = tuple(sorted(horiz + vert))
    return chains


def choi_clique_embedding(k: int, graph: ChimeraGraph | None = None):
    """Embed K_{4k} into C_k on exactly ``4k(k+1)`` qubits.

    Raises:
        InfeasibleError: ``graph`` lacks a qubit or coupler the construction needs.
    """
    from .embedding import Embedding, embedding_problems

    if graph is None:
        graph = build_chimera(k)
    elif graph.k != k:
        raise ValueError(f"graph is C_{graph.k}, not C_{k}")
    chains = choi_chains(k)
    missing = [q for chain in chains.values() for q in chain if q not in graph.qubits]
    if missing:
        raise InfeasibleError(f"{len(missing)} qubits of the clique region are inactive, e.g. {missing[0]}")
    n = 4 * k
    emb = Embedding(chains, n, graph)
    problems = embedding_problems(emb, [(i, j) for i in range(n) for j in range(i + 1, n)])
    if problems:
        raise InfeasibleError("clique region is damaged: " + problems[0])
    return emb

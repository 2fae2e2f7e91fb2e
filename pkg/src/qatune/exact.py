"""Exhaustive ground-state oracles for desk-scale verification."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import networkx as nx
import numpy as np

from . import _kernels
from .errors import NoGapError, OverLimitError
from .ising import Hamiltonian, energies, energy

DEFAULT_LIMIT = 28
_PREFIX_BITS = 6


@dataclass(frozen=True)
class GroundStates:
    """Result of an exhaustive search.

    Attributes:
        energy: exact minimum energy.
        states: ground states as an int8 ``(m, n)`` array, sorted by state
            code and truncated to the requested cap.
        degeneracy: total number of ground states (never truncated).
    """

    energy: float
    states: np.ndarray
    degeneracy: int

    @property
    def truncated(self) -> bool:
        return len(self.states) < self.degeneracy


def _tolerance(H: Hamiltonian) -> float:
    return 1e-9 * (1.0 + float(np.abs(H.h).sum()) + float(np.abs(H.edge_weights).sum()))


def codes_to_states(codes, n: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64).reshape(-1)
    bits = (codes[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


def states_to_codes(states) -> np.ndarray:
    S = np.atleast_2d(np.asarray(states))
    bits = (S > 0).astype(np.int64)
    return bits @ (np.int64(1) << np.arange(S.shape[1], dtype=np.int64))


def _scan(H: Hamiltonian, cap: int, limit: int, workers: int):
    n = H.n
    if n > limit:
        raise OverLimitError(f"n={n} exceeds the brute-force limit of {limit}")
    if n == 0:
        return 0.0, np.inf, 1, np.zeros(1, dtype=np.int64)
    indptr, indices, weights = H.csr()
    h = np.ascontiguousarray(H.h)
    tol = _tolerance(H)
    # fixed partition so the result never depends on the worker count
    high_bits = min(_PREFIX_BITS, n)
    low_bits = n - high_bits

    def chunk(prefix):
        return _kernels.gray_scan(h, indptr, indices, weights, prefix, low_bits, tol, cap)

    prefixes = range(1 << high_bits)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(chunk, prefixes))
    else:
        parts = [chunk(p) for p in prefixes]
    best = min(p[0] for p in parts)
    count = 0
    codes = []
    second = np.inf
    for b, s2, c, cs, nc in parts:
        if b <= best + tol:
            count += int(c)
            codes.append(cs[:nc])
            if s2 < second:
                second = s2
        elif b < second:
            second = b
    codes = np.sort(np.concatenate(codes)) if codes else np.zeros(0, dtype=np.int64)
    return best, second, count, codes


def brute_force(H: Hamiltonian, cap: int = 1024, limit: int = DEFAULT_LIMIT, workers: int = 1) -> GroundStates:
    """Exact ground energy, degeneracy and (up to ``cap``) ground states.

    The state space is split into 64 fixed prefix blocks; each block is
    walked in Gray-code order with incremental energy updates. The reported
    energy is recomputed directly from the first ground state.

    Raises:
        OverLimitError: ``H.n > limit``.
    """
    best, _, count, codes = _scan(H, cap, limit, workers)
    states = codes_to_states(codes[:cap], H.n)
    if len(states):
        best = energy(H, states[0])
    return GroundStates(float(best), states, int(count))


def energy_gap(H: Hamiltonian, limit: int = DEFAULT_LIMIT, workers: int = 1) -> tuple[float, float]:
    """The two smallest distinct energies ``(ground, first excited)``.

    Raises:
        NoGapError: every state has the same energy.
    """
    best, second, _, codes = _scan(H, 1, limit, workers)
    if not np.isfinite(second):
        raise NoGapError("energy landscape is flat")
    if len(codes):
        best = energy(H, codes_to_states(codes[:1], H.n)[0])
    return float(best), float(second)


def spectrum(H: Hamiltonian, limit: int = 20) -> np.ndarray:
    """Energies of all ``2**n`` states, indexed by state code (naive evaluation)."""
    if H.n > limit:
        raise OverLimitError(f"n={H.n} exceeds the spectrum limit of {limit}")
    return energies(H, codes_to_states(np.arange(1 << H.n), H.n))


def bipartition(H: Hamiltonian) -> tuple[np.ndarray, np.ndarray] | None:
    """Split vertices into ``(enumerated, free)`` so no coupler lies inside ``free``.

    Returns ``None`` if the coupling graph is not bipartite. The enumerated
    side is the smaller colour class of each component; isolated vertices
    are always free.
    """
    G = nx.Graph()
    G.add_nodes_from(range(H.n))
    G.add_edges_from(map(tuple, H.edge_index.tolist()))
    if not nx.is_bipartite(G):
        return None
    side_a: list[int] = []
    for comp in nx.connected_components(G):
        if len(comp) == 1:
            continue
        left, right = nx.bipartite.sets(G.subgraph(comp))
        smaller = left if (len(left), min(left)) <= (len(right), min(right)) else right
        side_a.extend(smaller)
    a = np.array(sorted(side_a), dtype=np.int64)
    b = np.setdiff1d(np.arange(H.n), a)
    return a, b


def bipartite_ground(H: Hamiltonian, cap: int = 1024, limit: int = 24, block: int = 1 << 14) -> GroundStates:
    """Exact ground states of a problem whose coupling graph is bipartite.

    Given the spins of one colour class, the other class decouples: each of
    its spins independently takes ``-sign(field)`` and contributes
    ``-|field|``. Enumerating only the smaller class is therefore exact, and
    covers Chimera-structured problems of up to ``2 * limit`` qubits.

    Raises:
        OverLimitError: not bipartite, or the enumerated class exceeds ``limit``.
    """
    split = bipartition(H)
    if split is None:
        raise OverLimitError("coupling graph is not bipartite")
    a, b = split
    na = len(a)
    if na > limit:
        raise OverLimitError(f"enumerated side has {na} vertices, limit is {limit}")
    pos_b = {int(v): i for i, v in enumerate(b)}
    pos_a = {int(v): i for i, v in enumerate(a)}
    C = np.zeros((na, len(b)))
    for (u, v), w in H.J.items():
        if u in pos_a:
            C[pos_a[u], pos_b[v]] += w
        else:
            C[pos_a[v], pos_b[u]] += w
    ha, hb = H.h[a], H.h[b]
    tol = _tolerance(H)

    best = np.inf
    hits: list[tuple[np.ndarray, np.ndarray]] = []
    total = 1 << na
    for start in range(0, total, block):
        codes = np.arange(start, min(start + block, total), dtype=np.int64)
        Sa = codes_to_states(codes, na).astype(np.float64)
        fields = hb + Sa @ C
        e = Sa @ ha - np.abs(fields).sum(axis=1)
        m = e.min()
        if m < best - tol:
            best = m
            hits = []
        if m <= best + tol:
            sel = e <= best + tol
            hits.append((codes[sel], fields[sel]))

    count = 0
    states = []
    for codes, fields in hits:
        zero = np.abs(fields) <= tol
        count += int(np.sum(np.left_shift(np.int64(1), zero.sum(axis=1))))
        for code, f, z in zip(codes, fields, zero):
            if len(states) >= cap:
                break
            sa = codes_to_states([code], na)[0]
            free = np.flatnonzero(z)
            for mask in range(1 << len(free)):
                if len(states) >= cap:
                    break
                s = np.empty(H.n, dtype=np.int8)
                s[a] = sa
                sb = np.where(f > 0, -1, 1).astype(np.int8)
                for t, idx in enumerate(free):
                    sb[idx] = 1 if (mask >> t) & 1 else -1
                s[b] = sb
                states.append(s)
    out = np.array(states, dtype=np.int8).reshape(-1, H.n)
    if len(out):
        out = out[np.argsort(states_to_codes(out), kind="stable")]
        ground = energy(H, out[0])
    else:
        ground = float(best)
    return GroundStates(float(ground), out, count)


def ground_state(H: Hamiltonian, cap: int = 1024, limit: int = DEFAULT_LIMIT) -> GroundStates:
    """Exact ground states by whichever exhaustive method fits ``H``.

    ``limit`` bounds the number of enumerated spins for either method.
    """
    if H.n <= min(limit, 22):
        return brute_force(H, cap=cap, limit=limit)
    try:
        return bipartite_ground(H, cap=cap, limit=limit)
    except OverLimitError:
        return brute_force(H, cap=cap, limit=limit)

"""Benchmark instance classes: random couplers, frustrated loops, cubic max-cut, NAE-3SAT.

Every generator is a pure function of its seed. Chimera-native classes are
indexed by hardware qubit id over the full ``8 k^2`` range; inactive qubits
are isolated spins with no field.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .chimera import ChimeraGraph
from .errors import ConfigError, GenerationFailure
from .exact import brute_force
from .ising import Hamiltonian, energy, format_problem, parse_problem, scale_to_unit

CLASSES = ("RAN", "FL", "3MC", "NAE")


def round_half_up(x: float) -> int:
    """``[x]``: nearest integer, halves rounded up."""
    return int(math.floor(x + 0.5))


@dataclass
class InstanceSpec:
    """Recipe and provenance of one generated instance.

    Attributes:
        cls: one of ``RAN``, ``FL``, ``3MC``, ``NAE``.
        n: problem size (hardware qubits for native classes, logical
            variables otherwise).
        seed: generator seed.
        R: precision limit (``RAN``, ``FL``).
        r: constraint ratio (``FL``, ``NAE``).
        k: Chimera size of the target graph (native classes).
        planted_state: known ground-state candidate, ``FL`` only.
        cycles: the frustrated loops of an ``FL`` instance.
        clauses: signed clauses of an ``NAE`` instance, each a list of three
            ``[variable, sign]`` pairs.
        attempts: generation attempts consumed (rejections plus one).
        scale_alpha: factor applied to the integer weights, if any.
    """

    cls: str
    n: int
    seed: int
    R: int | None = None
    r: float | None = None
    k: int | None = None
    planted_state: list[int] | None = None
    cycles: list[list[int]] | None = None
    clauses: list[list[list[int]]] | None = None
    attempts: int = 1
    scale_alpha: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ConfigError(f"unknown instance class {self.cls!r}")
        if (self.planted_state is not None) != (self.cls == "FL"):
            raise ConfigError("a planted state is present exactly for FL instances")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "InstanceSpec":
        return cls(**json.loads(text))


def _check_R(R) -> int:
    if int(R) != R or R < 1:
        raise ConfigError(f"precision limit R must be a positive integer, got {R}")
    return int(R)


def _full_size(G: ChimeraGraph) -> int:
    return 8 * G.k * G.k


# -- RAN --------------------------------------------------------------------


def gen_ran(G: ChimeraGraph, R: int, seed, with_fields: bool = False) -> Hamiltonian:
    """Uniform nonzero integer couplers in ``[-R, R]`` on every active coupler.

    With ``with_fields`` every active qubit also receives a field drawn the
    same way. The result is unit-scaled, so ``scale_alpha == 1/R``.
    """
    R = _check_R(R)
    rng = np.random.default_rng(seed)
    values = np.array([v for v in range(-R, R + 1) if v != 0], dtype=np.float64)
    J = dict(zip(G.couplers, rng.choice(values, size=len(G.couplers))))
    h = np.zeros(_full_size(G))
    if with_fields:
        active = np.array(sorted(G.qubits))
        h[active] = rng.choice(values, size=len(active))
    return scale_to_unit(Hamiltonian(h, J))


# -- FL ---------------------------------------------------------------------


def _walk_cycle(adj: dict[int, list[int]], starts: np.ndarray, rng, budget: int, cell_of) -> tuple[list[int], int]:
    """First cycle closed by a non-backtracking walk; restarts on dead ends and in-cell loops."""
    steps = 0
    while steps < budget:
        v = int(rng.choice(starts))
        path = [v]
        where = {v: 0}
        prev = -1
        while steps < budget:
            options = [w for w in adj[v] if w != prev]
            if not options:
                break
            w = options[int(rng.integers(len(options)))]
            steps += 1
            if w in where:
                cycle = path[where[w]:]
                if len({cell_of(q) for q in cycle}) > 1:
                    return cycle, steps
                break
            where[w] = len(path)
            path.append(w)
            prev, v = v, w
    return [], steps


def _fl_attempt(G: ChimeraGraph, R: int, m: int, rng):
    allowed = {q: set(G.adjacency[q]) for q in G.qubits}
    sums: dict[tuple[int, int], int] = {}
    cycles = []
    budget = 100 * G.num_qubits
    for _ in range(m):
        adj = {q: sorted(nb) for q, nb in allowed.items()}
        starts = np.array(sorted(q for q, nb in adj.items() if len(nb) >= 2))
        if len(starts) == 0:
            return None
        cycle, _ = _walk_cycle(adj, starts, rng, budget, G.cell_of)
        if not cycle:
            return None
        edges = [(min(a, b), max(a, b)) for a, b in zip(cycle, cycle[1:] + cycle[:1])]
        frustrated = int(rng.integers(len(edges)))
        for t, e in enumerate(edges):
            sums[e] = sums.get(e, 0) + (1 if t == frustrated else -1)
            if abs(sums[e]) == R:
                allowed[e[0]].discard(e[1])
                allowed[e[1]].discard(e[0])
        cycles.append(cycle)
    return sums, cycles


def gen_fl(G: ChimeraGraph, R: int = 2, r: float = 0.2, seed=0, retries: int = 10):
    """Frustrated-loop instance with the all-up state planted as a ground state.

    ``[r n]`` loops (``n`` active qubits) are found by non-backtracking random
    walks; a loop lying inside one unit cell is rejected. Each loop is
    ferromagnetic except for one random antiferromagnetic edge, and an edge is
    retired once its accumulated coupling reaches magnitude ``R``.

    Returns:
        ``(H, planted, cycles)``: unit-scaled Hamiltonian, the all-up state,
        and the loops as qubit-id lists.

    Raises:
        GenerationFailure: every attempt ran out of walk budget.
    """
    R = _check_R(R)
    if r <= 0:
        raise ConfigError(f"loop ratio r must be positive, got {r}")
    m = round_half_up(r * G.num_qubits)
    for attempt in range(retries):
        rng = np.random.default_rng([int(seed), attempt])
        result = _fl_attempt(G, R, m, rng)
        if result is None:
            continue
        sums, cycles = result
        J = {e: float(w) for e, w in sums.items() if w != 0}
        raw = Hamiltonian(np.zeros(_full_size(G)), J)
        H = scale_to_unit(raw) if J else Hamiltonian(raw.h, {}, 1.0)
        planted = np.ones(H.n, dtype=np.int8)
        return H, planted, cycles
    raise GenerationFailure(f"no frustrated-loop instance after {retries} attempts")


def planted_energy(cycles) -> int:
    """Unscaled energy of the all-up state: each loop of length ``n_i`` gives ``-(n_i - 2)``."""
    return -sum(len(c) - 2 for c in cycles)


def planted_consistent(H: Hamiltonian, cycles) -> bool:
    """All-up energy of ``H`` matches the loop closed form (after undoing the scale)."""
    alpha = H.scale_alpha or 1.0
    e = energy(H, np.ones(H.n, dtype=np.int8)) / alpha
    return abs(e - planted_energy(cycles)) <= 1e-9 * (1 + abs(e))


# -- 3MC --------------------------------------------------------------------


def random_cubic_graph(n: int, rng, max_tries: int = 10_000) -> nx.Graph:
    """Connected simple cubic graph from the pairing model with rejection."""
    if n < 4 or n % 2:
        raise ConfigError(f"cubic graphs need an even vertex count >= 4, got {n}")
    stubs = np.repeat(np.arange(n), 3)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {(int(min(a, b)), int(max(a, b))) for a, b in pairs}
        if len(edges) != len(pairs):
            continue
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(sorted(edges))
        if nx.is_connected(g):
            return g
    raise GenerationFailure(f"no simple connected cubic graph on {n} vertices after {max_tries} pairings")


def gen_3mc(n: int, seed) -> tuple[Hamiltonian, nx.Graph]:
    """Max-cut on a random connected cubic graph: ``h = 0``, ``J = +1`` per edge."""
    g = random_cubic_graph(n, np.random.default_rng(seed))
    return Hamiltonian(np.zeros(n), {e: 1.0 for e in g.edges}), g


def cut_size(g: nx.Graph, s) -> int:
    s = np.asarray(s)
    return sum(1 for u, v in g.edges if s[u] != s[v])


# -- NAE --------------------------------------------------------------------


def nae_hamiltonian(n: int, clauses) -> Hamiltonian:
    """Sum of clause Hamiltonians ``J_ab = q_a q_b`` over the three pairs of each clause."""
    J: dict[tuple[int, int], float] = {}
    for clause in clauses:
        for a in range(3):
            for b in range(a + 1, 3):
                (x, qx), (y, qy) = clause[a], clause[b]
                key = (min(x, y), max(x, y))
                J[key] = J.get(key, 0.0) + qx * qy
    return Hamiltonian(np.zeros(n), {e: w for e, w in sorted(J.items()) if w != 0})


def random_clauses(n: int, m: int, rng) -> list[list[list[int]]]:
    out = []
    for _ in range(m):
        xs = rng.choice(n, size=3, replace=False)
        qs = rng.choice([-1, 1], size=3)
        out.append([[int(x), int(q)] for x, q in zip(xs, qs)])
    return out


def gen_nae(n: int, r: float = 2.1, seed=0, unique_filter: bool = False, brute_force_cap: int = 24,
            max_attempts: int = 10_000):
    """Random NAE-3SAT instance with ``[r n]`` signed clauses.

    With ``unique_filter`` instances are redrawn until the ground state is
    unique up to a global flip (degeneracy 2), checked by brute force.

    Returns:
        ``(H, clauses, attempts)``.

    Raises:
        ConfigError: filter requested above ``brute_force_cap`` or bad sizes.
        GenerationFailure: no unique instance within ``max_attempts``.
    """
    if n < 4:
        raise ConfigError(f"NAE instances need at least 4 variables, got {n}")
    if r <= 0:
        raise ConfigError(f"clause ratio r must be positive, got {r}")
    if unique_filter and n > brute_force_cap:
        raise ConfigError(f"uniqueness filter needs brute force; n={n} exceeds cap {brute_force_cap}")
    m = round_half_up(r * n)
    for attempt in range(max_attempts):
        rng = np.random.default_rng([int(seed), attempt])
        clauses = random_clauses(n, m, rng)
        H = nae_hamiltonian(n, clauses)
        if not unique_filter or brute_force(H, cap=2, limit=brute_force_cap).degeneracy == 2:
            return H, clauses, attempt + 1
    raise GenerationFailure(f"no uniquely satisfiable NAE instance in {max_attempts} attempts")


# -- batch generation and files ----------------------------------------------


@dataclass(frozen=True)
class Instance:
    H: Hamiltonian
    spec: InstanceSpec


def generate(spec_cls: str, seed: int, *, G: ChimeraGraph | None = None, n: int | None = None,
             R: int = 1, r: float | None = None, with_fields: bool = False,
             unique_filter: bool = False, brute_force_cap: int = 24) -> Instance:
    """Dispatch to the generator for ``spec_cls`` and record its provenance."""
    if spec_cls in ("RAN", "FL") and G is None:
        raise ConfigError(f"{spec_cls} instances need a Chimera target")
    if spec_cls in ("3MC", "NAE") and n is None:
        raise ConfigError(f"{spec_cls} instances need a logical size")
    if spec_cls == "RAN":
        H = gen_ran(G, R, seed, with_fields=with_fields)
        return Instance(H, InstanceSpec("RAN", H.n, seed, R=R, k=G.k, scale_alpha=H.scale_alpha,
                                        extra={"with_fields": with_fields}))
    if spec_cls == "FL":
        r = 0.2 if r is None else r
        H, planted, cycles = gen_fl(G, R, r, seed)
        return Instance(H, InstanceSpec("FL", H.n, seed, R=R, r=r, k=G.k, scale_alpha=H.scale_alpha,
                                        planted_state=planted.tolist(), cycles=cycles))
    if spec_cls == "3MC":
        H, _ = gen_3mc(n, seed)
        return Instance(H, InstanceSpec("3MC", n, seed))
    if spec_cls == "NAE":
        r = 2.1 if r is None else r
        H, clauses, attempts = gen_nae(n, r, seed, unique_filter, brute_force_cap)
        return Instance(H, InstanceSpec("NAE", n, seed, r=r, clauses=clauses, attempts=attempts,
                                        extra={"unique_filter": unique_filter}))
    raise ConfigError(f"unknown instance class {spec_cls!r}")


def write_instance(inst: Instance, path) -> tuple[Path, Path]:
    """Write ``<path>`` (problem text) and ``<path>.json`` (metadata sidecar)."""
    path = Path(path)
    path.write_text(format_problem(inst.H))
    side = path.with_name(path.name + ".json")
    side.write_text(inst.spec.to_json() + "\n")
    return path, side


def read_instance(path) -> Instance:
    """Read a problem file and, if present, its metadata sidecar."""
    path = Path(path)
    H = parse_problem(path.read_text())
    side = path.with_name(path.name + ".json")
    if side.exists():
        spec = InstanceSpec.from_json(side.read_text())
        if spec.scale_alpha is not None:
            H = Hamiltonian(H.h, H.J, spec.scale_alpha)
    else:
        spec = None
    return Instance(H, spec)

"""Ising problems: representation, energy, scaling and gauge transformations.

A problem over ``n`` spins is the pair ``(h, J)`` with energy

    E(s) = sum_v h_v s_v + sum_{u<v} J_uv s_u s_v,    s in {-1, +1}^n.

Couplings are stored sparse and upper-triangular. Everything here is a pure
function of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DegenerateInputError, DimensionError, ParseError

__all__ = [
    "Hamiltonian",
    "energy",
    "energies",
    "apply_gauge",
    "gauge_state",
    "gauge_states",
    "scale_to_unit",
    "rescale",
    "random_gauge",
    "format_problem",
    "parse_problem",
    "write_problem",
    "read_problem",
]


def _normalize_couplings(n: int, J) -> dict[tuple[int, int], float]:
    items = J.items() if isinstance(J, Mapping) else J
    out: dict[tuple[int, int], float] = {}
    for key, w in items:
        u, v = int(key[0]), int(key[1])
        if u == v:
            raise ValueError(f"self-coupling on vertex {u}")
        if u > v:
            u, v = v, u
        if u < 0 or v >= n:
            raise ValueError(f"coupler ({u}, {v}) outside 0..{n - 1}")
        out[(u, v)] = out.get((u, v), 0.0) + float(w)
    return dict(sorted(out.items()))


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Local fields ``h`` and couplings ``J`` over vertices ``0..n-1``.

    ``J`` may be given as a mapping or an iterable of ``((u, v), w)`` pairs;
    ``(u, v)`` and ``(v, u)`` entries are folded into one upper-triangular
    key with summed weight.

    Attributes:
        h: read-only float64 vector of local fields.
        J: upper-triangular couplings ``{(u, v): w}`` with ``u < v``.
        scale_alpha: scaling factor applied to reach this problem, if any.
    """

    h: np.ndarray
    J: Mapping[tuple[int, int], float] = field(default_factory=dict)
    scale_alpha: float | None = None

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64).reshape(-1)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        J = _normalize_couplings(len(h), self.J)
        object.__setattr__(self, "J", J)
        if self.scale_alpha is not None and not self.scale_alpha > 0.0:
            raise ValueError(f"scale_alpha must be positive, got {self.scale_alpha}")
        if J:
            uv = np.array(list(J.keys()), dtype=np.int64)
            w = np.array(list(J.values()), dtype=np.float64)
        else:
            uv = np.empty((0, 2), dtype=np.int64)
            w = np.empty(0, dtype=np.float64)
        for a in (uv, w):
            a.setflags(write=False)
        object.__setattr__(self, "_uv", uv)
        object.__setattr__(self, "_w", w)

    @classmethod
    def zeros(cls, n: int) -> "Hamiltonian":
        return cls(np.zeros(n))

    @property
    def n(self) -> int:
        return len(self.h)

    @property
    def edge_index(self) -> np.ndarray:
        """``(M, 2)`` int array of coupler endpoints, sorted."""
        return self._uv

    @property
    def edge_weights(self) -> np.ndarray:
        return self._w

    @property
    def max_abs_weight(self) -> float:
        hm = float(np.max(np.abs(self.h))) if self.n else 0.0
        jm = float(np.max(np.abs(self._w))) if len(self._w) else 0.0
        return max(hm, jm)

    @property
    def is_hardware_ready(self) -> bool:
        """True when every weight lies in [-1, 1]."""
        return self.max_abs_weight <= 1.0

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency in CSR form: ``(indptr, indices, weights)``."""
        n = self.n
        u, v = self._uv[:, 0], self._uv[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        ws = np.concatenate([self._w, self._w])
        order = np.lexsort((cols, rows))
        rows, cols, ws = rows[order], cols[order], ws[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, cols.astype(np.int64), ws.astype(np.float64)

    def with_fields(self, h) -> "Hamiltonian":
        return Hamiltonian(h, self.J, self.scale_alpha)

    def __eq__(self, other):
        if not isinstance(other, Hamiltonian):
            return NotImplemented
        return (
            np.array_equal(self.h, other.h)
            and dict(self.J) == dict(other.J)
            and self.scale_alpha == other.scale_alpha
        )

    def __hash__(self):
        return hash((self.h.tobytes(), tuple(self.J.items()), self.scale_alpha))

    def __repr__(self):
        return f"Hamiltonian(n={self.n}, couplers={len(self.J)}, scale_alpha={self.scale_alpha})"


def _as_state(s, n: int) -> np.ndarray:
    s = np.asarray(s)
    if s.ndim != 1 or len(s) != n:
        raise DimensionError(f"state of shape {s.shape} does not match n={n}")
    return s


def energy(H: Hamiltonian, s) -> float:
    """Energy of a single spin state."""
    s = _as_state(s, H.n).astype(np.float64)
    uv = H.edge_index
    return float(np.dot(H.h, s) + np.dot(H.edge_weights, s[uv[:, 0]] * s[uv[:, 1]]))


def energies(H: Hamiltonian, states) -> np.ndarray:
    """Energies of a ``(k, n)`` batch of spin states."""
    S = np.asarray(states)
    if S.ndim == 1:
        S = S[None, :]
    if S.shape[1] != H.n:
        raise DimensionError(f"states of width {S.shape[1]} do not match n={H.n}")
    S = S.astype(np.float64)
    uv = H.edge_index
    return S @ H.h + (S[:, uv[:, 0]] * S[:, uv[:, 1]]) @ H.edge_weights


def apply_gauge(H: Hamiltonian, g) -> Hamiltonian:
    """Gauge-transformed copy: ``h'_u = h_u g_u`` and ``J'_uv = J_uv g_u g_v``."""
    g = _as_state(g, H.n).astype(np.float64)
    uv = H.edge_index
    w = H.edge_weights * g[uv[:, 0]] * g[uv[:, 1]]
    J = {(int(a), int(b)): float(x) for (a, b), x in zip(uv, w)}
    return Hamiltonian(H.h * g, J, H.scale_alpha)


def gauge_state(g, s) -> np.ndarray:
    """Elementwise product ``g * s``; an involution for fixed ``g``."""
    g = np.asarray(g)
    s = np.asarray(s)
    if g.shape != s.shape:
        raise DimensionError(f"gauge {g.shape} and state {s.shape} differ in length")
    return (g * s).astype(np.int8)


def gauge_states(g, states) -> np.ndarray:
    g = np.asarray(g, dtype=np.int8)
    S = np.asarray(states, dtype=np.int8)
    if S.shape[-1] != len(g):
        raise DimensionError(f"gauge of length {len(g)} does not match states {S.shape}")
    return S * g


def random_gauge(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(np.array([-1, 1], dtype=np.int8), size=n)


def scale_to_unit(H: Hamiltonian) -> Hamiltonian:
    """Scale all weights by ``alpha = 1 / max(|h|, |J|)``.

    The returned problem has every weight in [-1, 1] with at least one at
    +-1, and records the cumulative factor in ``scale_alpha``.

    Raises:
        DegenerateInputError: if every weight is zero.
    """
    m = H.max_abs_weight
    if m == 0.0:
        raise DegenerateInputError("cannot scale an all-zero Hamiltonian")
    # divide rather than multiply by 1/m so the largest weight lands on +-1 exactly
    J = {k: w / m for k, w in H.J.items()}
    alpha = (H.scale_alpha if H.scale_alpha is not None else 1.0) / m
    return Hamiltonian(H.h / m, J, alpha)


def rescale(H: Hamiltonian, factor: float) -> Hamiltonian:
    """Multiply every weight by ``factor`` and fold it into ``scale_alpha``."""
    if factor <= 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    alpha = factor * (H.scale_alpha if H.scale_alpha is not None else 1.0)
    J = {k: w * factor for k, w in H.J.items()}
    return Hamiltonian(H.h * factor, J, alpha)


# -- text format --------------------------------------------------------------
#
#   n
#   u u h_u      (nonzero fields)
#   u v J_uv     (couplers, u < v)


def format_problem(H: Hamiltonian) -> str:
    lines = [str(H.n)]
    for u, hu in enumerate(H.h):
        if hu != 0.0:
            lines.append(f"{u} {u} {float(hu)!r}")
    for (u, v), w in H.J.items():
        lines.append(f"{u} {v} {float(w)!r}")
    return "\n".join(lines) + "\n"


def parse_problem(text: str) -> Hamiltonian:
    """Parse the problem text format; errors carry the offending line number."""
    n = None
    h: np.ndarray | None = None
    J: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 1:
                raise ParseError("expected header line with vertex count", lineno)
            try:
                n = int(parts[0])
            except ValueError:
                raise ParseError(f"bad vertex count {parts[0]!r}", lineno) from None
            if n < 0:
                raise ParseError("negative vertex count", lineno)
            h = np.zeros(n)
            continue
        if len(parts) != 3:
            raise ParseError(f"expected 'u v weight', got {line!r}", lineno)
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"malformed entry {line!r}", lineno) from None
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"vertex out of range 0..{n - 1}", lineno)
        if u == v:
            h[u] += w
        else:
            key = (min(u, v), max(u, v))
            J[key] = J.get(key, 0.0) + w
    if n is None:
        raise ParseError("empty problem file")
    return Hamiltonian(h, J)


def write_problem(H: Hamiltonian, path) -> None:
    Path(path).write_text(format_problem(H))


def read_problem(path) -> Hamiltonian:
    return parse_problem(Path(path).read_text())


def hamiltonian_from_edges(n: int, edges: Iterable[tuple[int, int]], weight: float = 1.0) -> Hamiltonian:
    return Hamiltonian(np.zeros(n), [((u, v), weight) for u, v in edges])

"""Compiled inner loops. Inputs are CSR adjacency arrays from ``Hamiltonian.csr``.

Every kernel that draws random numbers reseeds numba's (thread-local)
generator from an explicit per-record seed, so results do not depend on
which thread runs which record.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _local_fields(h, indptr, indices, weights, s):
    n = len(h)
    f = h.copy()
    for u in range(n):
        acc = 0.0
        for p in range(indptr[u], indptr[u + 1]):
            acc += weights[p] * s[indices[p]]
        f[u] += acc
    return f


@njit(cache=True, nogil=True)
def anneal_batch(h, indptr, indices, weights, betas, seeds, out):
    """Metropolis single-spin-flip annealing, one record per seed.

    Each record starts from a uniform random state and performs one sweep
    (spins in index order) per entry of ``betas``.
    """
    n = len(h)
    s = np.empty(n, dtype=np.float64)
    for r in range(len(seeds)):
        np.random.seed(seeds[r])
        for u in range(n):
            s[u] = 1.0 if np.random.random() < 0.5 else -1.0
        f = _local_fields(h, indptr, indices, weights, s)
        for b in range(len(betas)):
            beta = betas[b]
            for u in range(n):
                dE = -2.0 * s[u] * f[u]
                x = np.random.random()
                if dE <= 0.0 or x < np.exp(-beta * dE):
                    s[u] = -s[u]
                    d = 2.0 * s[u]
                    for p in range(indptr[u], indptr[u + 1]):
                        f[indices[p]] += d * weights[p]
        for u in range(n):
            out[r, u] = np.int8(1) if s[u] > 0 else np.int8(-1)


@njit(cache=True, nogil=True)
def descent_batch(h, indptr, indices, weights, states, seeds, tol):
    """Greedy descent in place: random-permutation sweeps of strictly improving flips.

    A flip is taken only when it lowers the energy by more than ``tol``;
    a record stops after a full sweep with no flip.
    """
    n = len(h)
    s = np.empty(n, dtype=np.float64)
    for r in range(states.shape[0]):
        np.random.seed(seeds[r])
        for u in range(n):
            s[u] = states[r, u]
        f = _local_fields(h, indptr, indices, weights, s)
        improved = True
        while improved:
            improved = False
            order = np.random.permutation(n)
            for t in range(n):
                u = order[t]
                dE = -2.0 * s[u] * f[u]
                if dE < -tol:
                    s[u] = -s[u]
                    d = 2.0 * s[u]
                    for p in range(indptr[u], indptr[u + 1]):
                        f[indices[p]] += d * weights[p]
                    improved = True
        for u in range(n):
            states[r, u] = np.int8(1) if s[u] > 0 else np.int8(-1)


@njit(cache=True, nogil=True)
def gray_scan(h, indptr, indices, weights, prefix, low_bits, tol, cap):
    """Enumerate the ``2**low_bits`` states sharing a fixed high-bit prefix.

    Bit ``j`` of a state code set means spin ``j`` is +1. The low bits are
    walked in Gray-code order with O(degree) energy updates.

    Returns:
        ``(best, second, count, codes, n_codes)``: minimum energy, the
        smallest energy exceeding it by more than ``tol`` (``inf`` if none),
        the number of states within ``tol`` of the minimum, and the first
        ``cap`` of their codes in visiting order.
    """
    n = len(h)
    s = np.empty(n, dtype=np.float64)
    for j in range(n):
        if j < low_bits:
            s[j] = -1.0
        else:
            s[j] = 1.0 if (prefix >> (j - low_bits)) & 1 else -1.0
    e = 0.0
    for u in range(n):
        e += h[u] * s[u]
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if v > u:
                e += weights[p] * s[u] * s[v]
    f = _local_fields(h, indptr, indices, weights, s)
    codes = np.empty(max(cap, 1), dtype=np.int64)
    high = np.int64(prefix) << low_bits
    code = np.int64(0)
    best = e
    second = np.inf
    count = 1
    n_codes = 0
    if cap > 0:
        codes[0] = high | code
        n_codes = 1
    total = np.int64(1) << low_bits
    for i in range(1, total):
        j = 0
        x = i
        while (x & 1) == 0:
            x >>= 1
            j += 1
        e += -2.0 * s[j] * f[j]
        s[j] = -s[j]
        code ^= np.int64(1) << j
        d = 2.0 * s[j]
        for p in range(indptr[j], indptr[j + 1]):
            f[indices[p]] += d * weights[p]
        if e < best - tol:
            if best < second:
                second = best
            best = e
            count = 1
            n_codes = 0
            if cap > 0:
                codes[0] = high | code
                n_codes = 1
        elif e <= best + tol:
            count += 1
            if n_codes < cap:
                codes[n_codes] = high | code
                n_codes += 1
        elif e < second:
            second = e
    return best, second, count, codes, n_codes

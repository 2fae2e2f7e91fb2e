"""Intrinsic control error (ICE): Gaussian error on the programmed weights.

Errors are expressed on the nominal hardware scale [-1, 1] and added after
any problem scaling, so a problem scaled by ``alpha`` sees its relative
error amplified by ``1/alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ising import Hamiltonian, energies

V7_SIGMA_H = 0.050
V7_SIGMA_J = 0.035
V7_QUBITS = 481
V7_COUPLERS = 1306
V7_SIGMA_E = 1.67

_TRANSIENT_STREAM = 1


@dataclass(frozen=True)
class IceModel:
    """Per-programming Gaussian error on fields and couplers.

    ``sigma_h``/``sigma_J`` describe the persistent component, drawn once
    per programming cycle. The optional transient pair is redrawn for every
    read.
    """

    sigma_h: float = V7_SIGMA_H
    sigma_J: float = V7_SIGMA_J
    seed: int = 0
    transient_sigma_h: float = 0.0
    transient_sigma_J: float = 0.0

    def __post_init__(self):
        for name in ("sigma_h", "sigma_J", "transient_sigma_h", "transient_sigma_J"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def off(cls) -> "IceModel":
        return cls(0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.sigma_h == 0 and self.sigma_J == 0

    @property
    def has_transient(self) -> bool:
        return self.transient_sigma_h > 0 or self.transient_sigma_J > 0


def _perturb(H: Hamiltonian, sigma_h: float, sigma_J: float, rng: np.random.Generator) -> Hamiltonian:
    dh = rng.normal(0.0, sigma_h, size=H.n) if sigma_h > 0 else np.zeros(H.n)
    dJ = rng.normal(0.0, sigma_J, size=len(H.J)) if sigma_J > 0 else np.zeros(len(H.J))
    J = {k: w + d for (k, w), d in zip(H.J.items(), dJ)}
    return Hamiltonian(H.h + dh, J, H.scale_alpha)


def perturb(H: Hamiltonian, model: IceModel, draw_index: int = 0) -> Hamiltonian:
    """One persistent error draw, a pure function of ``(model.seed, draw_index)``.

    Perturbed weights are not clipped back into [-1, 1].
    """
    if model.is_zero:
        return H
    rng = np.random.default_rng([model.seed, draw_index])
    return _perturb(H, model.sigma_h, model.sigma_J, rng)


def perturb_transient(H: Hamiltonian, model: IceModel, draw_index: int, read_index: int) -> Hamiltonian:
    if not model.has_transient:
        return H
    rng = np.random.default_rng([model.seed, draw_index, read_index, _TRANSIENT_STREAM])
    return _perturb(H, model.transient_sigma_h, model.transient_sigma_J, rng)


def sigma_E(model: IceModel, N: int, M: int) -> float:
    """Standard deviation of the energy error: ``sqrt(N sigma_h^2 + M sigma_J^2)``."""
    if N < 0 or M < 0:
        raise ValueError("qubit and coupler counts must be non-negative")
    return math.sqrt(N * model.sigma_h**2 + M * model.sigma_J**2)


def success_band(N: int) -> float:
    """Energy tolerance ``1.67 * sqrt(N / 481)`` for the within-band criterion."""
    if N <= 0:
        raise ValueError("qubit count must be positive")
    return V7_SIGMA_E * math.sqrt(N / V7_QUBITS)


def energy_errors(H: Hamiltonian, model: IceModel, states, draw_indices) -> np.ndarray:
    """``E'(s) - E(s)`` for every (draw, state) pair, shape ``(draws, states)``."""
    base = energies(H, states)
    return np.array([energies(perturb(H, model, d), states) - base for d in draw_indices])


def estimate_max_energy_error(H: Hamiltonian, model: IceModel, num_states: int, draws: int, seed=0) -> float:
    """Empirical typical ``max_s |E'(s) - E(s)|`` over random states.

    Lower bound on the true maximum: only ``num_states`` uniformly random
    states are inspected per draw; the median over draws is returned.
    """
    rng = np.random.default_rng(seed)
    S = rng.choice(np.array([-1, 1], dtype=np.int8), size=(num_states, H.n))
    errs = energy_errors(H, model, S, range(draws))
    return float(np.median(np.abs(errs).max(axis=1)))

"""Continuous-time tight-binding particle on a ring of N sites.

Hamiltonian ``H = -gamma sum_j (|j+1><j| + |j><j+1|)`` with periodic boundaries and
hbar = 1.  Its eigenmodes are plane waves with energies ``-2 gamma cos(2 pi q / N)``,
and the propagator from ``n0`` to ``n`` is

    psi_n(t) = (1/N) sum_q exp(2j*pi*q*(n - n0)/N + 2j*gamma*t*cos(2 pi q / N)).

Fourier convention: ``psi^(q) = sum_j psi_j exp(-2j*pi*j*q/N)`` (numpy ``fft``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp

from . import _fourier

__all__ = [
    "TbmParams",
    "TbmState",
    "dispersion",
    "hamiltonian",
    "propagator_amplitude",
    "evolve",
    "evolve_ode",
    "site_occupation",
    "q_return",
    "oscillation_period",
]

_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class TbmParams:
    """Ring size ``N >= 2`` and hopping rate ``gamma > 0``."""

    N: int
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        g = float(self.gamma)
        if not math.isfinite(g) or g <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class TbmState:
    """Site amplitudes, stored as a read-only complex array."""

    amplitudes: NDArray[np.complex128]

    def __post_init__(self) -> None:
        arr = np.array(self.amplitudes, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("amplitudes must be a 1-D array of length N >= 2")
        arr.setflags(write=False)
        object.__setattr__(self, "amplitudes", arr)

    @classmethod
    def localized(cls, N: int, n0: int = 0) -> "TbmState":
        psi = np.zeros(N, dtype=np.complex128)
        psi[n0 % N] = 1.0
        return cls(psi)

    @property
    def N(self) -> int:
        return self.amplitudes.size

    def as_vector(self) -> NDArray[np.complex128]:
        return self.amplitudes.copy()

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def dispersion(params: TbmParams) -> NDArray[np.float64]:
    """Phase rates ``2 gamma cos(2 pi q / N)`` per unit time, in FFT order.

    A mode picks up ``exp(+1j * rate * t)``, i.e. its energy is ``-rate``.
    """
    q = np.arange(params.N)
    return 2.0 * params.gamma * np.cos(2.0 * np.pi * q / params.N)


def hamiltonian(params: TbmParams) -> NDArray[np.float64]:
    """Dense N x N hopping matrix (reference use only)."""
    N = params.N
    H = np.zeros((N, N))
    for j in range(N):
        H[(j + 1) % N, j] -= params.gamma
        H[j, (j + 1) % N] -= params.gamma
    return H


def propagator_amplitude(params: TbmParams, n: ArrayLike, n0: int, t: float) -> NDArray[np.complex128]:
    """Amplitude at sites ``n`` after time ``t`` for a particle started at ``n0``."""
    N = params.N
    q = np.arange(N)
    phase = np.outer(np.asarray(n) - n0, 2.0 * np.pi * q / N) + dispersion(params) * t
    return np.exp(1j * phase).sum(axis=-1) / N


def evolve(state: TbmState, params: TbmParams, t: float, *, direct_dft: bool = False) -> TbmState:
    """Evolve for time ``t`` by phase-rotating the Fourier modes.

    ``direct_dft=True`` uses the O(N^2) transform as a reference route.
    """
    if state.N != params.N:
        raise ValueError("state and parameters disagree on N")
    spec = _fourier.forward(state.amplitudes, -1, direct=direct_dft)
    spec = spec * np.exp(1j * dispersion(params) * t)
    return TbmState(_fourier.inverse(spec, -1, direct=direct_dft))


def evolve_ode(state: TbmState, params: TbmParams, t: float, *, rtol: float = 1e-12, atol: float = 1e-14) -> TbmState:
    """Integrate ``i dpsi/dt = H psi`` in site space with an 8th-order Runge-Kutta scheme.

    Independent of the mode decomposition; used as the comparison route.
    """
    if state.N != params.N:
        raise ValueError("state and parameters disagree on N")
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return TbmState(state.amplitudes)
    H = hamiltonian(params)
    sol = solve_ivp(
        lambda _, y: -1j * (H @ y), (0.0, float(t)), state.as_vector(), method="DOP853", rtol=rtol, atol=atol
    )
    if not sol.success:
        raise ArithmeticError(f"ODE integration failed: {sol.message}")
    return TbmState(sol.y[:, -1])


def site_occupation(state: TbmState) -> NDArray[np.float64]:
    return np.abs(state.amplitudes) ** 2


def q_return(params: TbmParams, tau: ArrayLike) -> NDArray[np.float64] | float:
    """Return probability ``|(1/N) sum_q exp(2j gamma tau cos(2 pi q/N))|^2``.

    Vectorised over ``tau``; a scalar argument gives a float.
    """
    tau_arr = np.asarray(tau, dtype=np.float64)
    scalar = tau_arr.ndim == 0
    t = np.atleast_1d(tau_arr).ravel()
    rates = dispersion(params)
    out = np.empty(t.size)
    rows = max(1, _CHUNK_ELEMENTS // params.N)
    for lo in range(0, t.size, rows):
        ph = np.outer(t[lo : lo + rows], rates)
        re = np.cos(ph).mean(axis=1)
        im = np.sin(ph).mean(axis=1)
        out[lo : lo + rows] = re * re + im * im
    if scalar:
        return float(out[0])
    return out.reshape(tau_arr.shape)


def oscillation_period(params: TbmParams) -> float:
    """Shortest period ``pi / (2 gamma)`` present in ``q(tau)``."""
    return math.pi / (2.0 * params.gamma)

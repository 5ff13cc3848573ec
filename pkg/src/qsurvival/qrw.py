"""Discrete-time coined quantum walk on a ring of N sites.

One step applies the coin

    C(theta) = [[cos theta, sin theta], [-sin theta, cos theta]]

to the (up, down) components at every site, then moves the up component one
site to the right and the down component one site to the left, with periodic
boundaries.

Fourier convention: ``psi~(k) = sum_n psi(n) exp(+2j*pi*k*n/N)``.  Mode arrays are
stored in FFT order, slot ``j`` holding the mode ``k = mode_index(N)[j]``.  The
modes are ``k = -(N-1)/2 .. (N-1)/2`` for odd N and ``k = -N/2+1 .. N/2`` for even N
(the slot holding ``k = N/2`` is the mode also known as ``-N/2``).  In mode space
the step is the 2x2 matrix

    M_k = [[e^{i kappa} cos theta,  e^{i kappa} sin theta],
           [-e^{-i kappa} sin theta, e^{-i kappa} cos theta]],   kappa = 2 pi k / N,

with eigenvalues ``exp(+-i omega_k)``, ``cos omega_k = cos kappa cos theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _fourier

__all__ = [
    "CoinAngle",
    "SpinorInit",
    "QrwState",
    "QrwEigenSystem",
    "coin_matrix",
    "mode_index",
    "step",
    "evolve_direct",
    "eigensystem",
    "fourier_propagate",
    "amplitude_closed_form",
    "site_occupation",
    "q_return",
    "parity_support",
]

# |sin theta| or |cos theta| below this switches to the exact degenerate-coin routes.
_SINGULAR = 1e-12
# Rows of the (time x mode) work matrices handled at once in q_return.
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class CoinAngle:
    """Coin angle restricted to ``0 <= theta <= pi``.

    Shifting the angle by pi flips the sign of the coin and leaves every
    occupation probability unchanged, so the restricted range loses nothing.
    Use :meth:`canonical` to map an arbitrary real angle into it.
    """

    theta: float

    def __post_init__(self) -> None:
        th = float(self.theta)
        if not math.isfinite(th) or th < 0.0 or th > math.pi:
            raise ValueError(f"coin angle must lie in [0, pi], got {self.theta!r}")
        object.__setattr__(self, "theta", th)

    @classmethod
    def from_degrees(cls, degrees: float) -> "CoinAngle":
        return cls(math.radians(degrees))

    @classmethod
    def canonical(cls, theta: float) -> "CoinAngle":
        """Reduce ``theta`` modulo pi into the allowed range."""
        return cls(math.fmod(math.fmod(float(theta), math.pi) + math.pi, math.pi))

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)

    @property
    def no_mixing(self) -> bool:
        """True when the coin is diagonal (theta = 0 or pi)."""
        return abs(math.sin(self.theta)) < _SINGULAR

    @property
    def full_swap(self) -> bool:
        """True when the coin is purely off-diagonal (theta = pi/2)."""
        return abs(math.cos(self.theta)) < _SINGULAR


@dataclass(frozen=True)
class SpinorInit:
    """Initial state ``(a|up> + b|down>) |n0> / sqrt(|a|^2 + |b|^2)``."""

    a: complex
    b: complex
    n0: int = 0

    def __post_init__(self) -> None:
        a, b = complex(self.a), complex(self.b)
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ValueError("spinor components must be finite")
        if abs(a) == 0.0 and abs(b) == 0.0:
            raise ValueError("spinor must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "n0", int(self.n0))

    @property
    def norm(self) -> float:
        return math.hypot(abs(self.a), abs(self.b))

    @property
    def unit_spinor(self) -> tuple[complex, complex]:
        nrm = self.norm
        return self.a / nrm, self.b / nrm

    def site(self, N: int) -> int:
        """Starting site as an index into an array of length N."""
        return self.n0 % N


def _frozen(x: ArrayLike) -> NDArray[np.complex128]:
    arr = np.array(x, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QrwState:
    """Walker amplitudes on a ring; ``up[n]`` and ``down[n]`` are read-only arrays."""

    up: NDArray[np.complex128]
    down: NDArray[np.complex128]

    def __post_init__(self) -> None:
        up, down = _frozen(self.up), _frozen(self.down)
        if up.ndim != 1 or up.shape != down.shape or up.size < 2:
            raise ValueError("up and down must be 1-D arrays of equal length N >= 2")
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)

    @classmethod
    def localized(cls, init: SpinorInit, N: int) -> "QrwState":
        if N < 2:
            raise ValueError("ring must have at least 2 sites")
        up = np.zeros(N, dtype=np.complex128)
        down = np.zeros(N, dtype=np.complex128)
        a, b = init.unit_spinor
        up[init.site(N)] = a
        down[init.site(N)] = b
        return cls(up, down)

    @classmethod
    def from_vector(cls, vec: ArrayLike) -> "QrwState":
        v = np.asarray(vec, dtype=np.complex128)
        N = v.size // 2
        return cls(v[:N], v[N:])

    @property
    def N(self) -> int:
        return self.up.size

    def as_vector(self) -> NDArray[np.complex128]:
        """Concatenation ``[up, down]`` of length 2N."""
        return np.concatenate([self.up, self.down])

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.up) ** 2 + np.abs(self.down) ** 2))


@dataclass(frozen=True)
class QrwEigenSystem:
    """Per-mode eigen-decomposition of the one-step propagator, in FFT slot order.

    Attributes
    ----------
    k, kappa : mode labels and ``2 pi k / N``.
    omega : quasi-energies in ``[0, pi]``.
    h_plus, h_minus : ``cot(theta) sin(kappa) +- csc(theta) sin(omega)``; NaN for a
        diagonal coin, where they are undefined.
    eigenvalues : shape (N, 2), ``exp(+i omega)`` and ``exp(-i omega)`` for a mixing coin.
    eigenvectors : shape (N, 2, 2); ``eigenvectors[j, :, s]`` is the unit eigenvector
        belonging to ``eigenvalues[j, s]``.
    """

    N: int
    theta: float
    k: NDArray[np.int64]
    kappa: NDArray[np.float64]
    omega: NDArray[np.float64]
    h_plus: NDArray[np.float64]
    h_minus: NDArray[np.float64]
    eigenvalues: NDArray[np.complex128]
    eigenvectors: NDArray[np.complex128] = field(repr=False)

    @property
    def phases(self) -> NDArray[np.float64]:
        """Arguments of the eigenvalues, shape (N, 2)."""
        return np.angle(self.eigenvalues)


def coin_matrix(theta: float) -> NDArray[np.float64]:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def mode_index(N: int) -> NDArray[np.int64]:
    """Mode label ``k`` held by each FFT slot ``j = 0..N-1``."""
    j = np.arange(N)
    return np.where(j <= N // 2, j, j - N) if N % 2 == 0 else np.where(j <= (N - 1) // 2, j, j - N)


def _theta(coin: CoinAngle | float) -> float:
    return coin.theta if isinstance(coin, CoinAngle) else float(coin)


def step(state: QrwState, coin: CoinAngle | float) -> QrwState:
    """One coin-then-shift step.

    ``coin`` may be a :class:`CoinAngle` or any real angle; the latter is useful
    for comparing evolutions at ``theta`` and ``theta + pi``.
    """
    th = _theta(coin)
    c, s = math.cos(th), math.sin(th)
    up = c * state.up + s * state.down
    down = -s * state.up + c * state.down
    return QrwState(np.roll(up, 1), np.roll(down, -1))


def evolve_direct(state: QrwState, coin: CoinAngle | float, t: int) -> QrwState:
    """Apply :func:`step` ``t`` times."""
    if t < 0:
        raise ValueError("t must be non-negative")
    for _ in range(int(t)):
        state = step(state, coin)
    return state


def _dispersion(kappa: NDArray[np.float64], theta: float) -> tuple[NDArray, NDArray, NDArray]:
    """``omega``, ``h_plus`` and ``h_minus`` without cancellation.

    ``sin(omega)`` comes from ``sin^2 kappa + cos^2 kappa sin^2 theta`` and of the
    two ``h`` values only the one whose numerator terms share a sign is
    evaluated directly; the other follows from ``h_plus * h_minus = -1``.
    """
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    sk, ck = np.sin(kappa), np.cos(kappa)
    sin_w = np.sqrt(sk * sk + (ck * sin_t) ** 2)
    omega = np.arctan2(sin_w, ck * cos_t)
    a = cos_t * sk
    plus_stable = a >= 0.0
    with np.errstate(divide="ignore"):
        h_plus_direct = (a + sin_w) / sin_t
        h_minus_direct = (a - sin_w) / sin_t
        h_plus = np.where(plus_stable, h_plus_direct, -1.0 / h_minus_direct)
        h_minus = np.where(plus_stable, -1.0 / h_plus_direct, h_minus_direct)
    return omega, h_plus, h_minus


def eigensystem(N: int, coin: CoinAngle) -> QrwEigenSystem:
    """Closed-form eigenvalues and eigenvectors of ``M_k`` for every mode."""
    th = coin.theta
    k = mode_index(N)
    kappa = 2.0 * np.pi * k / N
    cos_t = math.cos(th)
    vecs = np.zeros((N, 2, 2), dtype=np.complex128)
    if coin.no_mixing:
        sign = 1.0 if cos_t > 0 else -1.0
        vals = np.stack([sign * np.exp(1j * kappa), sign * np.exp(-1j * kappa)], axis=1)
        vecs[:, 0, 0] = 1.0
        vecs[:, 1, 1] = 1.0
        omega = np.arccos(np.clip(np.cos(kappa) * cos_t, -1.0, 1.0))
        nan = np.full(N, np.nan)
        return QrwEigenSystem(N, th, k, kappa, omega, nan, nan.copy(), vals, vecs)
    omega, h_plus, h_minus = _dispersion(kappa, th)
    vals = np.stack([np.exp(1j * omega), np.exp(-1j * omega)], axis=1)
    for s, h in enumerate((h_plus, h_minus)):
        nrm = np.hypot(1.0, h)
        vecs[:, 0, s] = -1j * np.exp(1j * kappa) * (h / nrm)
        vecs[:, 1, s] = 1.0 / nrm
    return QrwEigenSystem(N, th, k, kappa, omega, h_plus, h_minus, vals, vecs)


def _mode_matrix_power(N: int, coin: CoinAngle, t: int) -> NDArray[np.complex128]:
    """``M_k^t`` for every mode, shape (N, 2, 2)."""
    th = coin.theta
    kappa = 2.0 * np.pi * mode_index(N) / N
    out = np.zeros((N, 2, 2), dtype=np.complex128)
    if coin.no_mixing:
        sign = (1.0 if math.cos(th) > 0 else -1.0) ** t
        out[:, 0, 0] = sign * np.exp(1j * kappa * t)
        out[:, 1, 1] = sign * np.exp(-1j * kappa * t)
        return out
    if coin.full_swap:
        # M_k^2 = -1 when cos(theta) = 0.
        sign = -1.0 if (t // 2) % 2 else 1.0
        if t % 2 == 0:
            out[:, 0, 0] = sign
            out[:, 1, 1] = sign
        else:
            s = math.sin(th)
            out[:, 0, 1] = sign * s * np.exp(1j * kappa)
            out[:, 1, 0] = -sign * s * np.exp(-1j * kappa)
        return out
    es = eigensystem(N, coin)
    lam_t = es.eigenvalues**t
    V = es.eigenvectors
    return np.einsum("kis,ks,kjs->kij", V, lam_t, V.conj())


def fourier_propagate(state: QrwState, coin: CoinAngle, t: int, *, direct_dft: bool = False) -> QrwState:
    """Evolve ``t`` steps by diagonalising each Fourier mode.

    Diagonal and purely off-diagonal coins use exact matrix powers instead of
    the eigenvector formulas.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    t = int(t)
    spec = _fourier.forward(np.stack([state.up, state.down]), +1, direct=direct_dft)
    Mt = _mode_matrix_power(state.N, coin, t)
    out = np.einsum("kij,jk->ik", Mt, spec)
    up, down = _fourier.inverse(out, +1, direct=direct_dft)
    return QrwState(up, down)


def _centred_modes(N: int) -> NDArray[np.int64]:
    # Modes summed in closed form; for even N the mode -N/2 is added separately.
    if N % 2:
        return np.arange(-(N - 1) // 2, (N - 1) // 2 + 1)
    return np.arange(-N // 2 + 1, N // 2)


def amplitude_closed_form(
    init: SpinorInit, coin: CoinAngle, N: int, t: int, n: ArrayLike | None = None
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Up and down amplitudes at sites ``n`` (default all) after ``t`` steps.

    Uses the explicit real-mode sum over k; for even N the mode ``k = -N/2``
    contributes a separate staggered term.
    """
    t = int(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    sites = np.arange(N) if n is None else np.asarray(n, dtype=np.int64)
    a, b = init.unit_spinor
    th = coin.theta
    dn = sites - init.n0
    if coin.no_mixing:
        sign = (1.0 if math.cos(th) > 0 else -1.0) ** t
        up = np.where((dn - t) % N == 0, sign * a, 0.0).astype(np.complex128)
        down = np.where((dn + t) % N == 0, sign * b, 0.0).astype(np.complex128)
        return up, down
    k = _centred_modes(N)
    kappa = 2.0 * np.pi * k / N
    omega, h, _ = _dispersion(kappa, th)
    weight = 2.0 / (N * (1.0 + h * h))
    kd = np.outer(dn, kappa)
    wt = omega * t
    up = (a * np.cos(kd + wt) + b * h * np.sin(kd - kappa + wt)) @ weight
    down = (-a * h * np.sin(-kd - kappa + wt) + b * np.cos(-kd + wt)) @ weight
    if N % 2 == 0:
        stag = np.where((dn + t) % 2 == 0, 1.0, -1.0) / N
        ct, st = math.cos(th * t), math.sin(th * t)
        up = up + stag * (a * ct + b * st)
        down = down + stag * (-a * st + b * ct)
    return up, down


def site_occupation(state: QrwState) -> NDArray[np.float64]:
    """``P_n = |up_n|^2 + |down_n|^2``."""
    return np.abs(state.up) ** 2 + np.abs(state.down) ** 2


def q_return(init: SpinorInit, coin: CoinAngle, N: int, tau: ArrayLike) -> NDArray[np.float64] | float:
    """Return probability ``q(tau) = P_{n0}(tau)`` for integer ``tau >= 0``.

    Vectorised over ``tau``; a scalar argument gives a float.
    """
    tau_arr = np.asarray(tau)
    scalar = tau_arr.ndim == 0
    t = np.atleast_1d(tau_arr)
    if np.any(t < 0) or np.any(t != np.round(t)):
        raise ValueError("QRW return times must be non-negative integers")
    t = t.astype(np.float64)
    a, b = init.unit_spinor
    th = coin.theta
    if coin.no_mixing:
        ti = t.astype(np.int64)
        # Both components travel ballistically and meet n0 only after whole laps.
        out = np.where(ti % N == 0, 1.0, 0.0)
        return float(out[0]) if scalar else out
    k = _centred_modes(N)
    kappa = 2.0 * np.pi * k / N
    omega, h, _ = _dispersion(kappa, th)
    weight = 2.0 / (N * (1.0 + h * h))
    wh = weight * h
    out = np.empty(t.size)
    rows = max(1, _CHUNK_ELEMENTS // k.size)
    for lo in range(0, t.size, rows):
        tt = t[lo : lo + rows]
        ph = np.outer(tt, omega)
        c = np.cos(ph) @ weight
        s = np.sin(ph - kappa) @ wh
        up = a * c + b * s
        down = -a * s + b * c
        if N % 2 == 0:
            stag = np.where(tt.astype(np.int64) % 2 == 0, 1.0, -1.0) / N
            ct, st = np.cos(th * tt), np.sin(th * tt)
            up = up + stag * (a * ct + b * st)
            down = down + stag * (-a * st + b * ct)
        out[lo : lo + rows] = np.abs(up) ** 2 + np.abs(down) ** 2
    return float(out[0]) if scalar else out


def parity_support(N: int, n0: int, t: int) -> NDArray[np.bool_]:
    """Sites whose occupation can be nonzero after ``t`` steps from site ``n0``.

    A site is reachable when it equals ``n0 + j (mod N)`` for some displacement
    ``j`` in ``{-t, -t+2, ..., t}``.  For even N this is the parity lock
    ``n = n0 + t (mod 2)`` at every t.  For odd N the parity rule holds until the
    two wave fronts wrap around the ring, and every site is reachable once
    ``t >= N - 1``.
    """
    t = int(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    mask = np.zeros(N, dtype=bool)
    if N % 2 == 0:
        mask[(np.arange(N) - n0 - t) % 2 == 0] = True
        return mask
    if t >= N - 1:
        mask[:] = True
        return mask
    mask[(n0 + np.arange(-t, t + 1, 2)) % N] = True
    return mask

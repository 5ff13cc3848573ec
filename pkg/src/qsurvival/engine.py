"""Repeated free evolution interrupted by projective measurements of the initial state.

After each interval ``tau_alpha`` the detector asks whether the system is back in
its initial state ``|psi0>``.  Two continuations are supported:

* ``Scheme.PROJECTED`` keeps ``P|psi>`` with ``P = |psi0><psi0|``;
* ``Scheme.LEFTOVER`` keeps ``(1 - P)|psi>``.

``S_m`` is the squared norm after the m-th measurement (never renormalised) and
``F_m = S_{m-1} - S_m``.

Batched runs never leave the eigenbasis of the free evolution.  A state is
stored as coefficients ``c`` on the (unnormalised) Fourier eigenmodes, a free
interval multiplies ``c_j`` by ``exp(1j * phase_j * tau)`` and inner products
are ``<a|b> = (1/N) sum_j conj(a_j) b_j`` (Parseval).  Everything is elementwise,
so every realization is bit-identical however realizations are batched.

Random streams: realization ``i`` of a run with master seed ``s`` draws its
intervals from ``PCG64(SeedSequence(s, spawn_key=(i,)))``
(see :func:`realization_rng`).
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _fourier, qrw, tbm
from .errors import ConfigurationError, MonotonicityError
from .intervals import DiscreteDelta, IntervalLaw
from .tolerances import MONOTONICITY_ATOL

__all__ = [
    "Scheme",
    "QrwModel",
    "TbmModel",
    "Model",
    "Spectral",
    "Trajectory",
    "EnsembleResult",
    "Checkpoint",
    "measure",
    "first_detection",
    "realization_rng",
    "run_trajectory",
    "run_ensemble",
    "simulate_batch",
]

#: Realizations per unit of work.  Fixed so that results do not depend on worker count.
CHUNK = 64


class Scheme(enum.Enum):
    PROJECTED = "projected"
    LEFTOVER = "leftover"

    @classmethod
    def parse(cls, value: "Scheme | str") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown scheme {value!r}; expected 'projected' or 'leftover'") from None


@dataclass(frozen=True)
class Spectral:
    """Initial state in the eigenbasis of the free evolution.

    ``phases[j] * tau`` is the phase acquired by coefficient ``j`` in time ``tau``
    and ``<a|b> = scale * sum(conj(a) * b)``.
    """

    phases: NDArray[np.float64]
    c0: NDArray[np.complex128]
    scale: float


@dataclass(frozen=True)
class QrwModel:
    """Coined walk on N sites with coin angle and initial spinor."""

    N: int
    coin: qrw.CoinAngle
    init: qrw.SpinorInit
    kind = "qrw"

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ConfigurationError(f"N must be an integer >= 2, got {self.N!r}")

    def initial_state(self) -> qrw.QrwState:
        return qrw.QrwState.localized(self.init, self.N)

    def spectral(self) -> Spectral:
        es = qrw.eigensystem(self.N, self.coin)
        a, b = self.init.unit_spinor
        k = 2.0 * np.pi * es.k / self.N
        psi = np.exp(1j * k * self.init.n0)[:, None] * np.array([a, b])
        c0 = np.einsum("kis,ki->ks", es.eigenvectors.conj(), psi)
        return Spectral(es.phases.ravel(), c0.ravel(), 1.0 / self.N)

    def to_site(self, c: NDArray[np.complex128]) -> qrw.QrwState:
        es = qrw.eigensystem(self.N, self.coin)
        modes = np.einsum("kis,ks->ik", es.eigenvectors, c.reshape(self.N, 2))
        up, down = _fourier.inverse(modes, +1)
        return qrw.QrwState(up, down)

    def q_return(self, tau: ArrayLike):
        return qrw.q_return(self.init, self.coin, self.N, tau)

    @property
    def period(self) -> float:
        """Oscillation scale of ``q`` handed to :func:`~qsurvival.intervals.expect`."""
        return 2.0

    def check_law(self, law: IntervalLaw) -> None:
        if not law.discrete:
            raise ConfigurationError("the coined walk advances in whole steps; use a discrete interval law")
        if isinstance(law, DiscreteDelta) and law.tau0 % 2 == 1:
            if self.N % 2 == 0 or law.tau0 < self.N:
                raise ConfigurationError(
                    f"tau0 = {law.tau0} is odd: on this ring the walker cannot be at its start site after an odd "
                    "number of steps, so every measurement would find q = 0"
                )

    def descriptor(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "N": self.N,
            "theta": self.coin.theta,
            "a": [self.init.a.real, self.init.a.imag],
            "b": [self.init.b.real, self.init.b.imag],
            "n0": self.init.n0,
        }


@dataclass(frozen=True)
class TbmModel:
    """Tight-binding ring started on site ``n0``."""

    params: tbm.TbmParams
    n0: int = 0
    kind = "tbm"

    @property
    def N(self) -> int:
        return self.params.N

    def initial_state(self) -> tbm.TbmState:
        return tbm.TbmState.localized(self.N, self.n0)

    def spectral(self) -> Spectral:
        q = np.arange(self.N)
        c0 = np.exp(-2j * np.pi * self.n0 * q / self.N)
        return Spectral(tbm.dispersion(self.params), c0, 1.0 / self.N)

    def to_site(self, c: NDArray[np.complex128]) -> tbm.TbmState:
        return tbm.TbmState(np.fft.ifft(c))

    def q_return(self, tau: ArrayLike):
        return tbm.q_return(self.params, tau)

    @property
    def period(self) -> float:
        """Oscillation scale of ``q`` handed to :func:`~qsurvival.intervals.expect`."""
        return tbm.oscillation_period(self.params)

    def check_law(self, law: IntervalLaw) -> None:
        return None

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind, "N": self.N, "gamma": self.params.gamma, "n0": self.n0}


Model = Union[QrwModel, TbmModel]
State = Union[qrw.QrwState, tbm.TbmState]


def measure(state: State, init_state: State, scheme: Scheme | str) -> tuple[float, State]:
    """Project ``state`` according to ``scheme``.

    Returns ``(S, post_state)`` with ``S`` the squared norm of ``post_state``.
    """
    scheme = Scheme.parse(scheme)
    psi, psi0 = state.as_vector(), init_state.as_vector()
    overlap = np.vdot(psi0, psi)
    post = overlap * psi0 if scheme is Scheme.PROJECTED else psi - overlap * psi0
    weight = float(np.sum(np.abs(post) ** 2))
    if isinstance(state, qrw.QrwState):
        return weight, qrw.QrwState.from_vector(post)
    return weight, tbm.TbmState(post)


def first_detection(survival: ArrayLike) -> NDArray[np.float64]:
    """``F_m = S_{m-1} - S_m`` with ``S_0 = 1``; works along the last axis.

    Raises
    ------
    MonotonicityError
        If some ``S_m`` exceeds ``S_{m-1}`` by more than rounding noise.
    """
    S = np.asarray(survival, dtype=np.float64)
    prev = np.concatenate([np.ones(S.shape[:-1] + (1,)), S[..., :-1]], axis=-1)
    F = prev - S
    if np.any(F < -MONOTONICITY_ATOL):
        worst = int(np.argmin(F.reshape(-1, F.shape[-1]).min(axis=0)))
        raise MonotonicityError(f"survival increases at m = {worst + 1} by {-F.min():.3e}")
    return F


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for realization ``index``: ``PCG64(SeedSequence(master_seed, spawn_key=(index,)))``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))))


# --------------------------------------------------------------------------- batched propagation


@dataclass
class _Progress:
    step: int
    c: NDArray[np.complex128]
    S: NDArray[np.float64]


def simulate_batch(
    spec: Spectral,
    taus: NDArray[np.float64],
    scheme: Scheme,
    *,
    resume: _Progress | None = None,
    on_progress: Any = None,
) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    """Run ``R`` realizations at once.

    Parameters
    ----------
    spec : Spectral
    taus : array, shape (R, m)
    scheme : Scheme
    resume : optional saved progress to continue from.
    on_progress : optional callable ``(step, c, S) -> None`` invoked after each measurement.

    Returns
    -------
    S : array, shape (R, m)
    c : final coefficients, shape (R, K)
    """
    taus = np.asarray(taus, dtype=np.float64)
    R, m = taus.shape
    c0 = spec.c0
    c0c = np.conj(c0)
    if resume is None:
        start, c, S = 0, np.tile(c0, (R, 1)), np.zeros((R, m))
    else:
        start, c, S = resume.step, resume.c.copy(), resume.S.copy()
    constant = bool(np.all(taus == taus.flat[0])) if taus.size else True
    factor = np.exp(1j * spec.phases * taus.flat[0]) if constant and taus.size else None
    projected = scheme is Scheme.PROJECTED
    for i in range(start, m):
        if factor is not None:
            c *= factor
        else:
            c *= np.exp(1j * np.multiply.outer(taus[:, i], spec.phases))
        overlap = (c0c * c).sum(axis=-1) * spec.scale
        if projected:
            c = overlap[:, None] * c0
        else:
            c -= overlap[:, None] * c0
        S[:, i] = (c.real**2 + c.imag**2).sum(axis=-1) * spec.scale
        if not np.any(S[:, i]):
            S[:, i + 1 :] = 0.0
            c[:] = 0.0
            break
        if on_progress is not None:
            on_progress(i + 1, c, S)
    return S, c


# --------------------------------------------------------------------------- single trajectory


@dataclass(frozen=True)
class Trajectory:
    """One realization: intervals, survival ``S_1..S_m`` and first detection ``F_1..F_m``."""

    taus: NDArray[np.float64]
    survival: NDArray[np.float64]
    first_detection: NDArray[np.float64]
    final_state: Any = field(default=None, repr=False)


def _sample_taus(law: IntervalLaw, rng: np.random.Generator, m: int) -> NDArray[np.float64]:
    return np.asarray(law.sample(rng, m), dtype=np.float64).reshape(m)


def run_trajectory(
    model: Model, scheme: Scheme | str, law: IntervalLaw, m: int, rng: np.random.Generator, *, keep_state: bool = False
) -> Trajectory:
    """Simulate ``m`` measurements of one realization."""
    scheme = Scheme.parse(scheme)
    model.check_law(law)
    if m < 1:
        raise ConfigurationError("m must be at least 1")
    taus = _sample_taus(law, rng, m)
    S, c = simulate_batch(model.spectral(), taus[None, :], scheme)
    final = model.to_site(c[0]) if keep_state else None
    return Trajectory(taus, S[0], first_detection(S[0]), final)


# --------------------------------------------------------------------------- ensembles


@dataclass(frozen=True)
class EnsembleResult:
    """Per-m statistics of an ensemble of realizations.

    Attributes
    ----------
    m : 1..m_max
    mean_survival, sem_survival : arithmetic mean of ``S_m`` and its standard error.
    typical_survival : ``exp(mean log S_m)`` over realizations with ``S_m > 0``.
    log_sem : standard error of that mean of ``log S_m``.
    n_positive : number of realizations with ``S_m > 0``.
    mean_first_detection, typical_first_detection : the same two estimators for ``F_m``.
    traces : survival series of the first ``traces.shape[0]`` realizations.
    """

    m: NDArray[np.int64]
    mean_survival: NDArray[np.float64]
    sem_survival: NDArray[np.float64]
    typical_survival: NDArray[np.float64]
    log_sem: NDArray[np.float64]
    n_positive: NDArray[np.int64]
    mean_first_detection: NDArray[np.float64]
    typical_first_detection: NDArray[np.float64]
    traces: NDArray[np.float64] = field(repr=False)
    realizations: int
    master_seed: int
    descriptors: dict[str, Any] = field(default_factory=dict)


# s2 and l2 are sums of squared deviations from the chunk mean, merged pairwise
# so that a spread-free ensemble gets a standard error of exactly zero.
_SUMS = ("n", "s1", "s2", "l1", "l2", "npos", "f1", "fl1", "fpos")


def _moments(S: NDArray[np.float64], F: NDArray[np.float64]) -> dict[str, NDArray]:
    pos = S > 0
    logS = np.log(np.where(pos, S, 1.0))
    fpos = F > 0
    logF = np.log(np.where(fpos, F, 1.0))
    npos = pos.sum(axis=0)
    l1 = np.where(pos, logS, 0.0).sum(axis=0)
    lmean = l1 / np.maximum(npos, 1)
    return {
        "n": np.full(S.shape[1], S.shape[0], dtype=np.float64),
        "s1": S.sum(axis=0),
        "s2": ((S - S.mean(axis=0)) ** 2).sum(axis=0),
        "l1": l1,
        "l2": np.where(pos, (logS - lmean) ** 2, 0.0).sum(axis=0),
        "npos": npos,
        "f1": F.sum(axis=0),
        "fl1": np.where(fpos, logF, 0.0).sum(axis=0),
        "fpos": fpos.sum(axis=0),
    }


def _merge_centred(na, sa, qa, nb, sb, qb):
    """Combine (count, sum, squared deviations) of two disjoint samples."""
    n = na + nb
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.where((na > 0) & (nb > 0), sb / np.maximum(nb, 1) - sa / np.maximum(na, 1), 0.0)
        q = qa + qb + np.where(n > 0, delta * delta * na * nb / np.maximum(n, 1), 0.0)
    return q


def _combine(parts: list[dict[str, Any]], m: int) -> dict[str, NDArray]:
    total = {name: np.zeros(m) for name in _SUMS}
    for part in parts:
        total["s2"] = _merge_centred(total["n"], total["s1"], total["s2"], part["n"], part["s1"], part["s2"])
        total["l2"] = _merge_centred(total["npos"], total["l1"], total["l2"], part["npos"], part["l1"], part["l2"])
        for name in _SUMS:
            if name not in ("s2", "l2"):
                total[name] = total[name] + part[name]
    return total


@dataclass
class _ChunkTask:
    model: Model
    scheme: Scheme
    law: IntervalLaw
    m: int
    master_seed: int
    first: int
    count: int
    keep: int


def _run_chunk(task: _ChunkTask, resume: _Progress | None = None, on_progress: Any = None) -> dict[str, Any]:
    taus = np.stack([_sample_taus(task.law, realization_rng(task.master_seed, i), task.m) for i in range(task.first, task.first + task.count)])
    S, _ = simulate_batch(task.model.spectral(), taus, task.scheme, resume=resume, on_progress=on_progress)
    F = first_detection(S)
    out: dict[str, Any] = _moments(S, F)
    out["traces"] = S[: task.keep].copy()
    return out


class Checkpoint:
    """Periodic on-disk snapshots so that an interrupted ensemble can resume.

    Completed chunks are stored as partial sums; the chunk in progress is stored
    as its coefficient array and survival prefix.  The file is tied to one run by
    a hash of its inputs and removed once the run finishes.
    """

    def __init__(self, path: str | os.PathLike, interval_seconds: float = 60.0) -> None:
        self.path = Path(path)
        self.interval = float(interval_seconds)
        self._last = time.monotonic()
        self.key = ""

    def load(self) -> tuple[list[dict[str, Any]], _Progress | None]:
        if not self.path.exists():
            return [], None
        with np.load(self.path, allow_pickle=False) as z:
            if str(z["key"]) != self.key:
                return [], None
            n_done = int(z["n_done"])
            done = []
            for j in range(n_done):
                done.append({name: z[f"c{j}_{name}"] for name in (*_SUMS, "traces")})
            progress = None
            if int(z["step"]) > 0:
                progress = _Progress(int(z["step"]), z["c"], z["S"])
        return done, progress

    def due(self) -> bool:
        return time.monotonic() - self._last >= self.interval

    def save(self, done: list[dict[str, Any]], progress: _Progress | None) -> None:
        arrays: dict[str, Any] = {"key": np.array(self.key), "n_done": np.array(len(done))}
        for j, part in enumerate(done):
            for name in (*_SUMS, "traces"):
                arrays[f"c{j}_{name}"] = part[name]
        if progress is None:
            arrays.update(step=np.array(0), c=np.zeros(0, complex), S=np.zeros(0))
        else:
            arrays.update(step=np.array(progress.step), c=progress.c, S=progress.S)
        tmp = self.path.with_suffix(".tmp.npz")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(tmp, **arrays)
        os.replace(tmp, self.path)
        self._last = time.monotonic()

    def clear(self) -> None:
        if self.path.exists():
            self.path.unlink()


def _run_key(model: Model, scheme: Scheme, law: IntervalLaw, m: int, R: int, seed: int, keep: int) -> str:
    blob = json.dumps(
        [model.descriptor(), scheme.value, law.to_record(), m, R, seed, keep, CHUNK], sort_keys=True, default=str
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def _checkpoint_hook(checkpoint: Checkpoint | None, done: list[dict[str, Any]]):
    if checkpoint is None:
        return None

    def hook(step: int, c: NDArray[np.complex128], S: NDArray[np.float64]) -> None:
        if checkpoint.due():
            checkpoint.save(done, _Progress(step, c, S))

    return hook


def run_ensemble(
    model: Model,
    scheme: Scheme | str,
    law: IntervalLaw,
    m: int,
    R: int,
    master_seed: int,
    *,
    workers: int = 1,
    keep_traces: int = 8,
    checkpoint: Checkpoint | None = None,
) -> EnsembleResult:
    """Run ``R`` independent realizations of ``m`` measurements.

    The outcome depends only on the arguments, never on ``workers``: realization
    streams come from :func:`realization_rng` and partial sums are merged in
    fixed chunk order.
    """
    scheme = Scheme.parse(scheme)
    model.check_law(law)
    if R < 1:
        raise ConfigurationError("R must be at least 1")
    if m < 1:
        raise ConfigurationError("m must be at least 1")
    keep = min(int(keep_traces), R)
    tasks = []
    for first in range(0, R, CHUNK):
        count = min(CHUNK, R - first)
        tasks.append(_ChunkTask(model, scheme, law, m, int(master_seed), first, count, max(0, min(count, keep - first))))

    done: list[dict[str, Any]] = []
    progress: _Progress | None = None
    if checkpoint is not None:
        checkpoint.key = _run_key(model, scheme, law, m, R, int(master_seed), keep)
        done, progress = checkpoint.load()

    pending = tasks[len(done) :]
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, pending):
                done.append(part)
                if checkpoint is not None and checkpoint.due():
                    checkpoint.save(done, None)
    else:
        for task in pending:
            done.append(_run_chunk(task, progress, _checkpoint_hook(checkpoint, done)))
            progress = None
            if checkpoint is not None and checkpoint.due():
                checkpoint.save(done, None)

    total = _combine(done, m)
    traces = np.concatenate([part["traces"] for part in done], axis=0) if done else np.zeros((0, m))
    if checkpoint is not None:
        checkpoint.clear()

    mean = total["s1"] / R
    var = total["s2"] / max(R - 1, 1)
    npos = total["npos"].astype(np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        mlog = np.where(npos > 0, total["l1"] / np.maximum(npos, 1), -np.inf)
        lvar = np.where(npos > 1, total["l2"] / np.maximum(npos - 1, 1), 0.0)
        log_sem = np.sqrt(np.maximum(lvar, 0.0) / np.maximum(npos, 1))
        fpos = total["fpos"]
        typical_f = np.where(fpos > 0, np.exp(total["fl1"] / np.maximum(fpos, 1)), 0.0)
    return EnsembleResult(
        m=np.arange(1, m + 1),
        mean_survival=mean,
        sem_survival=np.sqrt(var / R),
        typical_survival=np.exp(mlog),
        log_sem=log_sem,
        n_positive=npos,
        mean_first_detection=total["f1"] / R,
        typical_first_detection=typical_f,
        traces=traces,
        realizations=R,
        master_seed=int(master_seed),
        descriptors={"model": model.descriptor(), "law": law.to_record(), "scheme": scheme.value},
    )

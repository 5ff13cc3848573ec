"""Closed-form Scheme-1 survival statistics and their large-deviation structure.

Under Scheme 1 the survival probability after m measurements is the product
``S_m = prod_alpha q(tau_alpha)`` of return probabilities.  Its ensemble mean is
``exp(m log E[q])`` and its most probable value ``exp(m E[log q])``.

For a finite-support law ``P(tau = tau_a) = p_a`` the fraction ``f_a`` of intervals
equal to ``tau_a`` fluctuates, and ``x = log(S_m) / m = sum_a f_a log q(tau_a)``
obeys a large-deviation principle with rate ``I(x)``.  By the contraction
principle, ``I(x)`` is the smallest Kullback-Leibler divergence ``sum f log(f/p)``
over frequency vectors ``f`` that produce ``x``.  That minimiser is the
exponentially tilted law ``f_a ~ p_a q(tau_a)^k``.  A second, linear
particular solution (``method="ansatz"``) is kept for comparison; it coincides
with the minimiser when the support has two points.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, special

from .errors import DomainError
from .intervals import IntervalLaw, expect
from .tolerances import TAIL_MASS

__all__ = [
    "BernoulliLaw",
    "RateFunctionSample",
    "ZeroReturnWarning",
    "average_survival",
    "typical_survival",
    "ld_rate_function",
    "ld_frequencies",
    "ld_minimizer",
    "rate_function_curve",
    "typical_from_ld",
    "zeno_deviation",
    "zeno_coefficient",
]

QFunction = Callable[[NDArray[np.float64]], ArrayLike]

# log q values closer than this are merged before solving for frequencies.
_DUPLICATE_ATOL = 1e-12


class ZeroReturnWarning(RuntimeWarning):
    """The law puts positive mass on intervals where ``q`` vanishes."""


@dataclass(frozen=True)
class BernoulliLaw:
    """Finite-support interval law ``P(tau = taus[a]) = probs[a]``."""

    taus: NDArray[np.float64]
    probs: NDArray[np.float64]

    def __post_init__(self) -> None:
        t = np.array(self.taus, dtype=np.float64).ravel()
        p = np.array(self.probs, dtype=np.float64).ravel()
        if t.size == 0 or t.shape != p.shape:
            raise ValueError("taus and probs must be non-empty and of equal length")
        if np.any(p <= 0.0):
            raise ValueError("probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        if np.unique(t).size != t.size:
            raise ValueError("support points must be distinct")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "taus", t)
        object.__setattr__(self, "probs", p)

    @property
    def d(self) -> int:
        return self.taus.size

    def expect(self, f: QFunction) -> float:
        values = np.broadcast_to(np.asarray(f(self.taus), dtype=np.float64), self.taus.shape)
        return float(np.dot(self.probs, values))

    def mean(self) -> float:
        return float(np.dot(self.probs, self.taus))


@dataclass(frozen=True)
class RateFunctionSample:
    """One point ``(x, I(x))`` of a rate function."""

    x: float
    I: float


class _ZeroReturn(Exception):
    pass


def _expect(law: IntervalLaw | BernoulliLaw, f: QFunction, **kw) -> float:
    if isinstance(law, BernoulliLaw):
        return law.expect(f)
    return expect(law, f, **kw)


def _as_m(m: ArrayLike) -> NDArray[np.float64] | float:
    arr = np.asarray(m, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("m must be non-negative")
    return arr


def _shape(values: NDArray[np.float64]) -> NDArray[np.float64] | float:
    return float(values) if values.ndim == 0 else values


def average_survival(
    law: IntervalLaw | BernoulliLaw,
    q: QFunction,
    m: ArrayLike,
    *,
    period: float | None = None,
    tail_tol: float = TAIL_MASS,
) -> NDArray[np.float64] | float:
    """Mean Scheme-1 survival ``exp(m log E[q(tau)])``.

    ``period`` and ``tail_tol`` are forwarded to :func:`~qsurvival.intervals.expect`;
    pass ``period`` whenever ``q`` oscillates (it always does for the lattice models).
    """
    mm = _as_m(m)
    mean_q = _expect(law, q, period=period, tail_tol=tail_tol)
    if mean_q <= 0.0:
        return _shape(np.where(mm == 0, 1.0, 0.0))
    return _shape(np.exp(mm * math.log(mean_q)))


def typical_survival(
    law: IntervalLaw | BernoulliLaw,
    q: QFunction,
    m: ArrayLike,
    *,
    period: float | None = None,
    tail_tol: float = TAIL_MASS,
) -> NDArray[np.float64] | float:
    """Most probable Scheme-1 survival ``exp(m E[log q(tau)])``.

    If ``q`` vanishes at an interval carrying positive probability the result is
    exactly zero for ``m >= 1`` and a :class:`ZeroReturnWarning` is issued.
    """
    mm = _as_m(m)

    def log_q(t: NDArray[np.float64]) -> NDArray[np.float64]:
        v = np.asarray(q(t), dtype=np.float64)
        if np.any(v <= 0.0):
            raise _ZeroReturn
        return np.log(v)

    try:
        mean_log = _expect(law, log_q, period=period, tail_tol=tail_tol)
    except _ZeroReturn:
        warnings.warn("q vanishes on a set of positive probability; typical survival is 0", ZeroReturnWarning, stacklevel=2)
        return _shape(np.where(mm == 0, 1.0, 0.0))
    return _shape(np.exp(mm * mean_log))


def _collapsed(bern: BernoulliLaw, q_values: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Distinct ``log q`` levels (ascending) with their summed probabilities."""
    q = np.asarray(q_values, dtype=np.float64).ravel()
    if q.shape != bern.probs.shape:
        raise ValueError("need one q value per support point")
    if np.any(q <= 0.0) or np.any(q > 1.0 + 1e-12):
        raise DomainError("q values must lie in (0, 1]")
    ell = np.log(q)
    order = np.argsort(ell, kind="stable")
    ell, p = ell[order], bern.probs[order]
    levels, weights = [ell[0]], [p[0]]
    for e, w in zip(ell[1:], p[1:]):
        if e - levels[-1] <= _DUPLICATE_ATOL:
            weights[-1] += w
        else:
            levels.append(e)
            weights.append(w)
    return np.array(levels), np.array(weights)


def _check_domain(x: float, ell: NDArray[np.float64]) -> float:
    slack = _DUPLICATE_ATOL * max(1.0, abs(ell[0]))
    if x < ell[0] - slack or x > ell[-1] + slack:
        raise DomainError(f"x = {x!r} lies outside [{ell[0]!r}, {ell[-1]!r}]; the rate is infinite there")
    return min(max(x, ell[0]), ell[-1])


def _tilt(ell: NDArray[np.float64], p: NDArray[np.float64], x: float) -> float:
    """Tilt parameter k with ``sum_a p_a e^{k l_a} (l_a - x) = 0``."""
    d = ell - x
    logp = np.log(p)

    def g(k: float) -> float:
        w = special.softmax(logp + k * d)
        return float(np.dot(w, d))

    if g(0.0) == 0.0:
        return 0.0
    lo, hi = (-1.0, 0.0) if g(0.0) > 0 else (0.0, 1.0)
    while g(lo) > 0:
        lo *= 2.0
    while g(hi) < 0:
        hi *= 2.0
    return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _frequencies_contraction(ell, p, x) -> NDArray[np.float64]:
    if ell.size == 1:
        return np.ones(1)
    if x <= ell[0]:
        return np.eye(ell.size)[0]
    if x >= ell[-1]:
        return np.eye(ell.size)[-1]
    k = _tilt(ell, p, x)
    return special.softmax(np.log(p) + k * (ell - x))


def _frequencies_ansatz(ell, p, x) -> NDArray[np.float64]:
    d = ell.size
    if d == 1:
        return np.ones(1)
    f = np.empty(d)
    f[:-1] = (ell[-1] - x) / ((d - 1) * (ell[-1] - ell[:-1]))
    f[-1] = 1.0 - f[:-1].sum()
    if np.any(f < -1e-12) or np.any(f > 1.0 + 1e-12):
        raise DomainError(f"linear frequency solution leaves [0, 1] at x = {x!r}")
    return np.clip(f, 0.0, 1.0)


def _kl(f: NDArray[np.float64], p: NDArray[np.float64]) -> float:
    # Non-negative in exact arithmetic; clip the rounding residue at the minimiser.
    return max(0.0, float(np.sum(special.rel_entr(f, p))))


Method = Literal["contraction", "ansatz"]


def ld_frequencies(
    bern: BernoulliLaw, q_values: ArrayLike, x: float, *, method: Method = "contraction"
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Dominant frequency vector at ``x``.

    Returns ``(log_q_levels, f)`` over the distinct ``log q`` levels in ascending order.
    """
    ell, p = _collapsed(bern, q_values)
    x = _check_domain(float(x), ell)
    if method == "contraction":
        return ell, _frequencies_contraction(ell, p, x)
    if method == "ansatz":
        return ell, _frequencies_ansatz(ell, p, x)
    raise ValueError(f"unknown method {method!r}")


def ld_rate_function(
    bern: BernoulliLaw, q_values: ArrayLike, x: ArrayLike, *, method: Method = "contraction"
) -> NDArray[np.float64] | float:
    """Rate function ``I(x)`` of ``log(S_m) / m`` for a finite-support law.

    Parameters
    ----------
    bern : BernoulliLaw
    q_values : array_like
        ``q(tau_a)`` for each support point, in (0, 1].
    x : float or array_like
        Points in ``[min log q, max log q]``.
    method : {"contraction", "ansatz"}
        ``"contraction"`` (default) minimises the divergence exactly;
        ``"ansatz"`` uses the linear particular solution, which is exact for two
        distinct levels and an upper bound otherwise.

    Raises
    ------
    DomainError
        If some ``x`` lies outside the achievable range, or the linear solution
        leaves the probability simplex.
    """
    ell, p = _collapsed(bern, q_values)
    xs = np.asarray(x, dtype=np.float64)
    out = np.empty(xs.shape)
    if method not in ("contraction", "ansatz"):
        raise ValueError(f"unknown method {method!r}")
    solver = _frequencies_contraction if method == "contraction" else _frequencies_ansatz
    for idx, xv in np.ndenumerate(xs):
        xv = _check_domain(float(xv), ell)
        out[idx] = _kl(solver(ell, p, xv), p)
    return _shape(out)


def ld_minimizer(bern: BernoulliLaw, q_values: ArrayLike) -> float:
    """The zero of the rate function, reached at zero tilt: ``sum_a p_a log q_a``."""
    ell, p = _collapsed(bern, q_values)
    return float(np.dot(p, ell))


def rate_function_curve(
    bern: BernoulliLaw, q_values: ArrayLike, n_points: int = 101, *, method: Method = "contraction"
) -> list[RateFunctionSample]:
    """``I(x)`` on a uniform grid spanning the achievable range."""
    ell, _ = _collapsed(bern, q_values)
    xs = np.linspace(ell[0], ell[-1], n_points) if ell.size > 1 else ell.copy()
    values = np.atleast_1d(ld_rate_function(bern, q_values, xs, method=method))
    return [RateFunctionSample(float(a), float(b)) for a, b in zip(xs, values)]


def typical_from_ld(bern: BernoulliLaw, q_values: ArrayLike, m: ArrayLike) -> NDArray[np.float64] | float:
    """``exp(m x*)`` with ``x*`` the rate-function zero."""
    return _shape(np.exp(_as_m(m) * ld_minimizer(bern, q_values)))


def zeno_deviation(q: QFunction, tau0: float, m: ArrayLike) -> NDArray[np.float64] | float:
    """``1 - q(tau0)^m``, evaluated without cancellation for small deviations."""
    mm = _as_m(m)
    if tau0 == 0.0:
        return _shape(np.zeros_like(mm))
    qv = float(np.asarray(q(np.array([float(tau0)])), dtype=np.float64).ravel()[0])
    if qv <= 0.0:
        return _shape(np.where(mm == 0, 0.0, 1.0))
    return _shape(-np.expm1(mm * math.log(qv)))


def zeno_coefficient(q: QFunction, tau0s: ArrayLike, m: int) -> float:
    """Least-squares ``C`` in ``1 - q(tau0)^m ~ C m tau0^2`` over the given ``tau0s``."""
    t = np.asarray(tau0s, dtype=np.float64)
    x = m * t**2
    y = np.array([zeno_deviation(q, float(tv), m) for tv in t])
    return float(np.dot(x, y) / np.dot(x, x))

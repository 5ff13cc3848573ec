"""Waiting-time laws for the intervals between successive measurements.

Four laws live on the even positive integers ``tau = 2, 4, 6, ...`` (written
``tau = 2j`` below) and four on the positive reals.  Every law is an immutable
dataclass offering sampling, exact moments, point masses or densities, and an
expectation functional :func:`expect` for Scheme-1 analytics.

Variances that diverge are reported as the :data:`INFINITE` marker rather than
as a floating-point number.
"""

from __future__ import annotations

import enum
import functools
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Callable, ClassVar

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from .errors import QuadratureError
from .tolerances import QUADRATURE_RTOL, TAIL_MASS

__all__ = [
    "INFINITE",
    "Divergent",
    "IntervalLaw",
    "DiscreteExponential",
    "DiscretePowerLaw",
    "DiscreteDelta",
    "Poisson",
    "ContinuousExponential",
    "ContinuousPowerLaw",
    "ContinuousDelta",
    "HalfNormal",
    "LAW_KINDS",
    "law_from_record",
    "expect",
    "zeta",
    "hurwitz_zeta",
]


class Divergent(enum.Enum):
    """Marker for a moment that does not exist."""

    INFINITE = "infinite"

    def __repr__(self) -> str:
        return "INFINITE"


INFINITE = Divergent.INFINITE

# Largest inverse-CDF table kept for the discrete power law; mass beyond it is
# drawn by exact rejection sampling.
_POWER_TABLE_MAX = 1 << 20
_DEFAULT_MAX_TERMS = 1 << 22
_EVAL_CHUNK = 1 << 16


def hurwitz_zeta(s: float, q: int = 1) -> float:
    """``sum_{n >= q} n^{-s}`` for ``s > 1`` and integer ``q >= 1``.

    Sixty-four terms are summed directly; the remainder is the integral
    ``x^{1-s}/(s-1)`` plus Euler-Maclaurin corrections, accurate far below 1e-12.
    """
    if s <= 1.0:
        raise ValueError("zeta sum diverges for s <= 1")
    if q < 1:
        raise ValueError("q must be a positive integer")
    head = math.fsum(float(n) ** -s for n in range(q, q + 64))
    x = float(q + 64)
    tail = (
        x ** (1.0 - s) / (s - 1.0)
        + 0.5 * x**-s
        + s * x ** (-s - 1.0) / 12.0
        - s * (s + 1) * (s + 2) * x ** (-s - 3.0) / 720.0
        + s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * x ** (-s - 5.0) / 30240.0
    )
    return head + tail


def zeta(s: float) -> float:
    """Riemann zeta function for real ``s > 1``."""
    return hurwitz_zeta(s, 1)


class IntervalLaw(ABC):
    """Common interface of the eight waiting-time laws."""

    kind: ClassVar[str]
    discrete: ClassVar[bool]

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        """Draw i.i.d. intervals; integer dtype for discrete laws."""

    @abstractmethod
    def mean(self) -> float: ...

    @abstractmethod
    def variance(self) -> float | Divergent: ...

    @abstractmethod
    def mass_or_density(self, tau: ArrayLike) -> NDArray[np.float64] | float:
        """Point mass (discrete) or density (continuous); zero off the support."""

    @property
    def is_delta(self) -> bool:
        return False

    @property
    def support_min(self) -> float:
        return 2.0 if self.discrete else 0.0

    def to_record(self) -> dict[str, Any]:
        """Tagged record ``{"kind": ..., <parameters>}`` for config files."""
        return {"kind": self.kind, **asdict(self)}  # type: ignore[call-overload]


class _EvenLattice(IntervalLaw):
    """Laws on ``tau = 2j``, ``j = 1, 2, ...``, defined by masses ``w(j)``."""

    discrete = True

    @abstractmethod
    def _mass_j(self, j: NDArray[np.float64]) -> NDArray[np.float64]:
        """Mass at ``tau = 2j``, also evaluated at non-integer ``j`` for tail integrals."""

    @abstractmethod
    def _tail_j(self, J: int) -> float:
        """Probability that ``j > J``."""

    def mass_or_density(self, tau: ArrayLike) -> NDArray[np.float64] | float:
        t = np.asarray(tau, dtype=np.float64)
        j = t / 2.0
        ok = (t >= 2.0) & (j == np.floor(j))
        out = np.zeros_like(t)
        if np.any(ok):
            out[ok] = self._mass_j(j[ok])
        return float(out) if out.ndim == 0 else out

    def _tail_integral(self, J: int, f) -> float:
        """``int_{J+1/2}^inf w(x) f(2x) dx``, the smooth continuation of the omitted sum."""
        g = lambda x: float(self._mass_j(np.array([x]))[0] * _call(f, np.array([2.0 * x]))[0])
        return _quad(g, J + 0.5, math.inf, QUADRATURE_RTOL)

    def cutoff(self, tail_tol: float = TAIL_MASS, max_terms: int = _DEFAULT_MAX_TERMS) -> int:
        """Smallest ``J`` (capped at ``max_terms``) with ``P(j > J) <= tail_tol``."""
        lo, hi = 0, 16
        while self._tail_j(hi) > tail_tol:
            lo, hi = hi, 2 * hi
            if hi >= max_terms:
                return max_terms if self._tail_j(max_terms) > tail_tol else self._bisect(lo, max_terms, tail_tol)
        return self._bisect(lo, hi, tail_tol)

    def _bisect(self, lo: int, hi: int, tol: float) -> int:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._tail_j(mid) > tol:
                lo = mid
            else:
                hi = mid
        return hi


@dataclass(frozen=True)
class DiscreteExponential(_EvenLattice):
    """``p(tau = 2j) = r (1 - r)^{j-1}``, ``0 < r < 1``."""

    r: float
    kind: ClassVar[str] = "discrete_exponential"

    def __post_init__(self) -> None:
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"r must lie in (0, 1), got {self.r!r}")

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        j = rng.geometric(self.r, size=size)
        return 2 * int(j) if size is None else 2 * j.astype(np.int64)

    def mean(self) -> float:
        return 2.0 / self.r

    def variance(self) -> float:
        return 4.0 * (1.0 - self.r) / self.r**2

    def _mass_j(self, j):
        return self.r * np.exp((j - 1.0) * math.log1p(-self.r))

    def _tail_j(self, J: int) -> float:
        return math.exp(J * math.log1p(-self.r))


@dataclass(frozen=True)
class DiscretePowerLaw(_EvenLattice):
    """``p(tau) = 2^s / (zeta(s) tau^s)``, i.e. ``p(2j) = j^{-s} / zeta(s)``, ``s > 2``."""

    s: float
    kind: ClassVar[str] = "discrete_power_law"

    def __post_init__(self) -> None:
        if not self.s > 2.0:
            raise ValueError(f"s must exceed 2 for a finite mean, got {self.s!r}")

    @property
    def normalization(self) -> float:
        return _zeta_cached(self.s)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        n = 1 if size is None else int(np.prod(size))
        cdf = _power_table(self.s)
        u = rng.random(n)
        j = np.searchsorted(cdf, u, side="right") + 1
        tail = np.flatnonzero(u >= cdf[-1])
        if tail.size:
            j[tail] = self._sample_tail(rng, tail.size, cdf.size)
        out = 2 * j.astype(np.int64)
        return int(out[0]) if size is None else out.reshape(size)

    def _sample_tail(self, rng: np.random.Generator, n: int, J: int) -> NDArray[np.int64]:
        # Proposal floor(x), x Pareto on [J+1, inf); acceptance bound (1 + 1/(J+1))^s.
        s = self.s
        bound = (1.0 + 1.0 / (J + 1)) ** s
        out = np.empty(n, dtype=np.int64)
        filled = 0
        while filled < n:
            k = n - filled
            x = (J + 1) * (1.0 - rng.random(k)) ** (-1.0 / (s - 1.0))
            j = np.floor(x)
            cell = (j ** (1.0 - s) - (j + 1.0) ** (1.0 - s)) / (s - 1.0)
            accept = rng.random(k) * bound * cell <= j**-s
            got = j[accept].astype(np.int64)
            out[filled : filled + got.size] = got
            filled += got.size
        return out

    def mean(self) -> float:
        return 2.0 * _zeta_cached(self.s - 1.0) / self.normalization

    def variance(self) -> float | Divergent:
        if self.s <= 3.0:
            return INFINITE
        z = self.normalization
        return 4.0 * (_zeta_cached(self.s - 2.0) / z - (_zeta_cached(self.s - 1.0) / z) ** 2)

    def _mass_j(self, j):
        return j**-self.s / self.normalization

    def _tail_j(self, J: int) -> float:
        return hurwitz_zeta(self.s, J + 1) / self.normalization

    def _tail_integral(self, J: int, f) -> float:
        # Substituting x = X u^{-1/(s-1)} maps the power-law tail onto [0, 1].
        s, X = self.s, J + 0.5
        g = lambda u: float(_call(f, np.array([2.0 * X * u ** (-1.0 / (s - 1.0))]))[0])
        scale = X ** (1.0 - s) / ((s - 1.0) * self.normalization)
        return scale * _quad(g, 0.0, 1.0, QUADRATURE_RTOL, limit=500)


@dataclass(frozen=True)
class Poisson(_EvenLattice):
    """``p(tau = 2j) = e^{-lam} lam^{j-1} / (j-1)!``, ``lam > 0``."""

    lam: float
    kind: ClassVar[str] = "poisson"

    def __post_init__(self) -> None:
        if not self.lam > 0.0:
            raise ValueError(f"lam must be positive, got {self.lam!r}")

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        k = rng.poisson(self.lam, size=size)
        return 2 * (1 + int(k)) if size is None else 2 * (1 + k.astype(np.int64))

    def mean(self) -> float:
        return 2.0 * (1.0 + self.lam)

    def variance(self) -> float:
        return 4.0 * self.lam

    def _mass_j(self, j):
        k = j - 1.0
        return np.exp(-self.lam + k * math.log(self.lam) - special.gammaln(k + 1.0))

    def _tail_j(self, J: int) -> float:
        # P(j > J) = P(K >= J) for K ~ Poisson(lam).
        return 1.0 if J <= 0 else float(special.gammainc(J, self.lam))


@dataclass(frozen=True)
class DiscreteDelta(IntervalLaw):
    """Fixed interval ``tau0``.

    ``tau0`` may be any positive integer.  The even lattice is the natural home
    of the discrete laws, but whether an odd interval is meaningful depends on
    the lattice, so the measurement engine makes that call.
    """

    tau0: int
    kind: ClassVar[str] = "discrete_delta"
    discrete: ClassVar[bool] = True

    def __post_init__(self) -> None:
        if int(self.tau0) != self.tau0 or self.tau0 < 1:
            raise ValueError(f"tau0 must be a positive integer, got {self.tau0!r}")
        object.__setattr__(self, "tau0", int(self.tau0))

    @property
    def is_delta(self) -> bool:
        return True

    @property
    def support_min(self) -> float:
        return float(self.tau0)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        return self.tau0 if size is None else np.full(size, self.tau0, dtype=np.int64)

    def mean(self) -> float:
        return float(self.tau0)

    def variance(self) -> float:
        return 0.0

    def mass_or_density(self, tau: ArrayLike) -> NDArray[np.float64] | float:
        t = np.asarray(tau, dtype=np.float64)
        out = np.where(t == self.tau0, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out


class _Continuous(IntervalLaw):
    discrete = False

    @abstractmethod
    def cdf(self, tau: ArrayLike) -> NDArray[np.float64] | float: ...

    @abstractmethod
    def quantile(self, u: ArrayLike) -> NDArray[np.float64] | float:
        """Inverse CDF on ``[0, 1)``."""


@dataclass(frozen=True)
class ContinuousExponential(_Continuous):
    """Density ``r exp(-r tau)`` on ``tau >= 0``."""

    r: float
    kind: ClassVar[str] = "continuous_exponential"

    def __post_init__(self) -> None:
        if not self.r > 0.0:
            raise ValueError(f"r must be positive, got {self.r!r}")

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        return rng.exponential(1.0 / self.r, size=size)

    def mean(self) -> float:
        return 1.0 / self.r

    def variance(self) -> float:
        return 1.0 / self.r**2

    def mass_or_density(self, tau):
        t = np.asarray(tau, dtype=np.float64)
        out = np.where(t >= 0.0, self.r * np.exp(-self.r * np.maximum(t, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, tau):
        t = np.maximum(np.asarray(tau, dtype=np.float64), 0.0)
        out = -np.expm1(-self.r * t)
        return float(out) if out.ndim == 0 else out

    def quantile(self, u):
        out = -np.log1p(-np.asarray(u, dtype=np.float64)) / self.r
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ContinuousPowerLaw(_Continuous):
    """Density ``(alpha / tau_ch) (tau / tau_ch)^{-1-alpha}`` on ``tau >= tau_ch``, ``alpha > 1``."""

    alpha: float
    tau_ch: float = 1.0
    kind: ClassVar[str] = "continuous_power_law"

    def __post_init__(self) -> None:
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must exceed 1 for a finite mean, got {self.alpha!r}")
        if not self.tau_ch > 0.0:
            raise ValueError(f"tau_ch must be positive, got {self.tau_ch!r}")

    @property
    def support_min(self) -> float:
        return float(self.tau_ch)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        u = 1.0 - rng.random(size)
        return self.tau_ch * u ** (-1.0 / self.alpha)

    def mean(self) -> float:
        return self.tau_ch * self.alpha / (self.alpha - 1.0)

    def variance(self) -> float | Divergent:
        a = self.alpha
        if a <= 2.0:
            return INFINITE
        return self.tau_ch**2 * a / ((a - 1.0) ** 2 * (a - 2.0))

    def mass_or_density(self, tau):
        t = np.asarray(tau, dtype=np.float64)
        x = np.maximum(t, self.tau_ch) / self.tau_ch
        out = np.where(t >= self.tau_ch, self.alpha / self.tau_ch * x ** (-1.0 - self.alpha), 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, tau):
        x = np.maximum(np.asarray(tau, dtype=np.float64), self.tau_ch) / self.tau_ch
        out = -np.expm1(-self.alpha * np.log(x))
        return float(out) if out.ndim == 0 else out

    def quantile(self, u):
        out = self.tau_ch * (1.0 - np.asarray(u, dtype=np.float64)) ** (-1.0 / self.alpha)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ContinuousDelta(IntervalLaw):
    """Fixed real interval ``tau0 > 0``."""

    tau0: float
    kind: ClassVar[str] = "continuous_delta"
    discrete: ClassVar[bool] = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tau0) and self.tau0 > 0.0):
            raise ValueError(f"tau0 must be positive, got {self.tau0!r}")
        object.__setattr__(self, "tau0", float(self.tau0))

    @property
    def is_delta(self) -> bool:
        return True

    @property
    def support_min(self) -> float:
        return self.tau0

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        return self.tau0 if size is None else np.full(size, self.tau0)

    def mean(self) -> float:
        return self.tau0

    def variance(self) -> float:
        return 0.0

    def mass_or_density(self, tau):
        # Point mass: reported as unit weight at tau0, matching the discrete convention.
        t = np.asarray(tau, dtype=np.float64)
        out = np.where(t == self.tau0, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, tau):
        out = np.where(np.asarray(tau, dtype=np.float64) >= self.tau0, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HalfNormal(_Continuous):
    """Density ``sqrt(2/(pi sigma^2)) exp(-(tau - tau_hn)^2 / (2 sigma^2))`` on ``tau >= tau_hn``."""

    sigma: float
    tau_hn: float = 0.0
    kind: ClassVar[str] = "half_normal"

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not self.tau_hn >= 0.0:
            raise ValueError(f"tau_hn must be non-negative, got {self.tau_hn!r}")

    @property
    def support_min(self) -> float:
        return float(self.tau_hn)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        return self.tau_hn + self.sigma * np.abs(rng.standard_normal(size))

    def mean(self) -> float:
        return self.tau_hn + self.sigma * math.sqrt(2.0 / math.pi)

    def variance(self) -> float:
        return self.sigma**2 * (1.0 - 2.0 / math.pi)

    def mass_or_density(self, tau):
        t = np.asarray(tau, dtype=np.float64)
        z = (t - self.tau_hn) / self.sigma
        out = np.where(t >= self.tau_hn, math.sqrt(2.0 / math.pi) / self.sigma * np.exp(-0.5 * z * z), 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, tau):
        z = np.maximum(np.asarray(tau, dtype=np.float64) - self.tau_hn, 0.0) / self.sigma
        out = special.erf(z / math.sqrt(2.0))
        return float(out) if out.ndim == 0 else out

    def quantile(self, u):
        out = self.tau_hn + self.sigma * math.sqrt(2.0) * special.erfinv(np.asarray(u, dtype=np.float64))
        return float(out) if out.ndim == 0 else out


LAW_KINDS: dict[str, type[IntervalLaw]] = {
    cls.kind: cls
    for cls in (
        DiscreteExponential,
        DiscretePowerLaw,
        DiscreteDelta,
        Poisson,
        ContinuousExponential,
        ContinuousPowerLaw,
        ContinuousDelta,
        HalfNormal,
    )
}


def law_from_record(record: dict[str, Any]) -> IntervalLaw:
    """Build a law from ``{"kind": ..., <parameters>}``; unknown keys are rejected."""
    rec = dict(record)
    kind = rec.pop("kind", None)
    if kind not in LAW_KINDS:
        raise ValueError(f"unknown law kind {kind!r}; expected one of {sorted(LAW_KINDS)}")
    cls = LAW_KINDS[kind]
    allowed = set(cls.__dataclass_fields__)  # type: ignore[attr-defined]
    extra = set(rec) - allowed
    if extra:
        raise ValueError(f"unexpected parameter(s) {sorted(extra)} for law {kind!r}")
    return cls(**rec)


@functools.lru_cache(maxsize=None)
def _zeta_cached(s: float) -> float:
    return zeta(s)


@functools.lru_cache(maxsize=8)
def _power_table(s: float) -> NDArray[np.float64]:
    law = DiscretePowerLaw(s)
    J = law.cutoff(TAIL_MASS, _POWER_TABLE_MAX)
    j = np.arange(1, J + 1, dtype=np.float64)
    cdf = np.cumsum(j**-s) / law.normalization
    cdf.setflags(write=False)
    return cdf


# --------------------------------------------------------------------------- expectations


def _call(f: Callable[[NDArray[np.float64]], ArrayLike], x: NDArray[np.float64]) -> NDArray[np.float64]:
    y = np.asarray(f(x), dtype=np.float64)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    if not np.all(np.isfinite(y)):
        raise ValueError("integrand returned non-finite values on the support")
    return y


def _quad(
    fun: Callable[[float], float], a: float, b: float, rtol: float, limit: int = 200, atol: float = 0.0
) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fun, a, b, epsrel=rtol, epsabs=atol, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] failed: {exc}") from exc
    if not math.isfinite(val):
        raise QuadratureError(f"quadrature on [{a}, {b}] returned {val}")
    return val


def expect(
    law: IntervalLaw,
    f: Callable[[NDArray[np.float64]], ArrayLike],
    *,
    period: float | None = None,
    tail_tol: float = TAIL_MASS,
    rtol: float = QUADRATURE_RTOL,
    max_terms: int = _DEFAULT_MAX_TERMS,
) -> float:
    """Expectation of ``f(tau)`` under ``law``.

    Parameters
    ----------
    law : IntervalLaw
    f : callable
        Vectorised: receives a float array of intervals, returns an array of the
        same shape.  Must be finite on the support.
    period : float, optional
        Marks ``f`` as oscillatory.  Continuous laws are then integrated panel by
        panel with this width, and the mass beyond the truncation point is
        weighted by the running mean of ``f`` instead of by an integral of a
        smooth continuation.  For discrete laws any value selects that running-
        mean tail.
    tail_tol : float
        Probability mass left beyond the explicit sum or panel range.
    rtol : float
        Relative tolerance handed to adaptive quadrature.
    max_terms : int
        Cap on explicitly summed lattice points.

    Raises
    ------
    QuadratureError
        If adaptive quadrature fails to converge.
    """
    if law.is_delta:
        return float(_call(f, np.array([float(law.support_min)]))[0])
    if isinstance(law, _EvenLattice):
        return _expect_lattice(law, f, period, tail_tol, max_terms)
    assert isinstance(law, _Continuous)
    if period is None:
        return _expect_quantile(law, f, rtol)
    return _expect_panels(law, f, period, tail_tol, rtol)


def _expect_lattice(law: _EvenLattice, f, period, tail_tol, max_terms) -> float:
    J = law.cutoff(tail_tol, max_terms)
    total = 0.0
    last_vals = np.empty(0)
    for lo in range(1, J + 1, _EVAL_CHUNK):
        j = np.arange(lo, min(lo + _EVAL_CHUNK, J + 1), dtype=np.float64)
        vals = _call(f, 2.0 * j)
        total += float(np.dot(law._mass_j(j), vals))
        last_vals = np.concatenate([last_vals, vals])[-max(256, _EVAL_CHUNK // 4) :]
    rest = law._tail_j(J)
    if rest == 0.0:
        return total
    if period is None:
        return total + law._tail_integral(J, f)
    return total + rest * float(np.mean(last_vals))


def _expect_quantile(law: _Continuous, f, rtol: float) -> float:
    g = lambda u: float(_call(f, np.array([law.quantile(u)]))[0])
    return _quad(g, 0.0, 1.0, rtol, limit=500)


def _expect_panels(law: _Continuous, f, period: float, tail_tol: float, rtol: float) -> float:
    if not period > 0.0:
        raise ValueError("period must be positive")
    lo = float(law.support_min)
    hi = float(law.quantile(1.0 - tail_tol))
    n_panels = max(1, math.ceil((hi - lo) / period))
    edges = lo + period * np.arange(n_panels + 1)
    weighted = lambda x: float(law.mass_or_density(x) * _call(f, np.array([x]))[0])
    cdf = np.asarray(law.cdf(edges), dtype=np.float64)
    f_scale = max(1.0, float(np.max(np.abs(_call(f, edges)))))
    # Far panels carry almost no mass; an absolute tolerance proportional to
    # that mass keeps the total error below rtol * max|f| without chasing
    # relative accuracy on values near the underflow of cancelling oscillations.
    total = math.fsum(
        _quad(weighted, a, b, rtol, atol=rtol * f_scale * max(float(cb - ca), 0.0))
        for a, b, ca, cb in zip(edges[:-1], edges[1:], cdf[:-1], cdf[1:])
    )
    rest = 1.0 - float(law.cdf(edges[-1]))
    if rest <= 0.0:
        return total
    window = min(8, n_panels)
    a = edges[-1 - window]
    plain = lambda x: float(_call(f, np.array([x]))[0])
    width = edges[-1] - a
    mean_f = _quad(plain, a, edges[-1], rtol, limit=50 * window, atol=rtol * f_scale * width) / width
    return total + rest * mean_f

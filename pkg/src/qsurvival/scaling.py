"""Power-law exponents, crossover scales and data collapse for survival series.

All fits work in log-log coordinates on log-uniformly decimated points, so every
decade of ``m`` carries the same weight however densely it is sampled.  Two
decimation modes exist: picking the sample nearest to each grid point (exact on
clean power laws) and averaging the series over each logarithmic bin (robust
against oscillating or noisy data).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError

__all__ = [
    "FitWindow",
    "ScalingReport",
    "CrossoverM1",
    "CrossoverM2",
    "CollapseResult",
    "log_decimate",
    "block_average",
    "block_period",
    "fit_power_law",
    "fit_fixed_exponent",
    "detect_crossover_m1",
    "detect_crossover_m2",
    "collapse_score",
    "default_windows",
    "oscillation_amplitude",
]

Regime = Literal["early", "intermediate", "tail"]

MIN_POINTS = 10


@dataclass(frozen=True)
class FitWindow:
    """Closed range ``[m_lo, m_hi]`` of measurement counts."""

    m_lo: float
    m_hi: float

    def __post_init__(self) -> None:
        if not (self.m_lo > 0 and self.m_hi > self.m_lo):
            raise ValueError(f"need 0 < m_lo < m_hi, got [{self.m_lo}, {self.m_hi}]")

    @property
    def decades(self) -> float:
        return math.log10(self.m_hi / self.m_lo)


@dataclass(frozen=True)
class ScalingReport:
    """Least-squares power law ``value ~ exp(intercept) * m**exponent``.

    ``residual`` is the root-mean-square deviation in natural-log units.
    """

    exponent: float
    stderr: float
    window: FitWindow
    residual: float
    regime: Regime
    intercept: float = 0.0
    n_points: int = 0


@dataclass(frozen=True)
class CrossoverM1:
    """Crossover between the early and intermediate first-detection branches."""

    m_star: float
    rescaled: float
    conclusive: bool
    reason: str = ""
    early: ScalingReport | None = None
    late: ScalingReport | None = None


@dataclass(frozen=True)
class CrossoverM2:
    """Onset of the exponential tail for a family of ring sizes."""

    sizes: tuple[int, ...]
    m_star: dict[int, float]
    conclusive: dict[int, bool]
    delta: float
    delta_stderr: float
    fits: dict[int, ScalingReport] = field(default_factory=dict)
    reason: str = ""

    @property
    def all_conclusive(self) -> bool:
        return bool(self.conclusive) and all(self.conclusive.values()) and math.isfinite(self.delta)


@dataclass(frozen=True)
class CollapseResult:
    """Mean squared log-deviation among curves, with and without rescaling."""

    rescaled: float
    unrescaled: float

    @property
    def improvement(self) -> float:
        return self.unrescaled / self.rescaled if self.rescaled > 0 else math.inf


# --------------------------------------------------------------------------- preprocessing


def block_average(values: ArrayLike, block: int) -> NDArray[np.float64]:
    """Centred moving average over ``block`` consecutive entries (shrinking at the ends)."""
    y = np.asarray(values, dtype=np.float64)
    if block <= 1:
        return y.copy()
    kernel = np.ones(int(block))
    num = np.convolve(y, kernel, mode="same")
    den = np.convolve(np.ones_like(y), kernel, mode="same")
    return num / den


def block_period(mean_tau: float) -> int:
    """Smoothing width ``2 <tau>`` measurements, at least 1."""
    return max(1, int(round(2.0 * mean_tau)))


def log_decimate(
    m: ArrayLike,
    values: ArrayLike,
    window: FitWindow | None = None,
    *,
    per_decade: int = 20,
    average: bool = False,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Reduce ``(m, values)`` to roughly ``per_decade`` points per decade.

    With ``average=False`` the sample nearest each log-uniform grid point is kept.
    With ``average=True`` values are averaged over logarithmic bins, the abscissa
    being the geometric mean of the ``m`` in the bin.
    """
    m = np.asarray(m, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if window is not None:
        keep = (m >= window.m_lo) & (m <= window.m_hi)
        m, y = m[keep], y[keep]
    if m.size == 0:
        return m, y
    lo, hi = math.log10(m[0]), math.log10(m[-1])
    n_bins = max(1, int(math.ceil((hi - lo) * per_decade)))
    if not average:
        grid = np.logspace(lo, hi, n_bins + 1)
        idx = np.unique(np.clip(np.searchsorted(m, grid), 0, m.size - 1))
        return m[idx], y[idx]
    edges = np.logspace(lo, hi, n_bins + 1)
    edges[-1] = np.nextafter(edges[-1], np.inf)
    which = np.clip(np.searchsorted(edges, m, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    ysum = np.bincount(which, weights=y, minlength=n_bins)
    lsum = np.bincount(which, weights=np.log(m), minlength=n_bins)
    ok = counts > 0
    return np.exp(lsum[ok] / counts[ok]), ysum[ok] / counts[ok]


def _log_points(m, y, window, per_decade, block, average) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    m = np.asarray(m, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if m.shape != y.shape or m.ndim != 1:
        raise ValueError("m and values must be 1-D arrays of equal length")
    if block and block > 1:
        y = block_average(y, block)
    md, yd = log_decimate(m, y, window, per_decade=per_decade, average=average)
    if np.any(yd <= 0) or not np.all(np.isfinite(yd)):
        raise DomainError(f"values must be positive in [{window.m_lo}, {window.m_hi}]")
    if md.size < MIN_POINTS:
        raise ValueError(f"window [{window.m_lo}, {window.m_hi}] holds {md.size} decimated points; need {MIN_POINTS}")
    return np.log(md), np.log(yd)


def fit_power_law(
    m: ArrayLike,
    values: ArrayLike,
    window: FitWindow,
    *,
    regime: Regime = "intermediate",
    per_decade: int = 20,
    block: int | None = None,
    average: bool = False,
) -> ScalingReport:
    """Least-squares exponent of ``values`` against ``m`` inside ``window``.

    Parameters
    ----------
    m, values : array_like
        Increasing measurement counts and the positive series to fit.
    window : FitWindow
    regime : {"early", "intermediate", "tail"}
        Label copied into the report.
    per_decade : int
        Decimation density.
    block : int, optional
        Width of a centred moving average applied before decimation, used to
        suppress oscillations of known period.
    average : bool
        Average within logarithmic bins instead of sampling single points.

    Raises
    ------
    DomainError
        If a value in the window is not positive.
    ValueError
        If the window holds fewer than ten decimated points.
    """
    x, ly = _log_points(m, values, window, per_decade, block, average)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ly - A @ coef
    n = x.size
    sxx = float(np.sum((x - x.mean()) ** 2))
    s2 = float(resid @ resid) / (n - 2)
    stderr = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    rms = math.sqrt(float(resid @ resid) / n)
    return ScalingReport(slope, stderr, window, rms, regime, intercept, n)


def fit_fixed_exponent(
    m: ArrayLike,
    values: ArrayLike,
    window: FitWindow,
    exponent: float,
    *,
    regime: Regime = "intermediate",
    per_decade: int = 20,
    average: bool = True,
    min_points: int = 3,
) -> ScalingReport:
    """Amplitude of a power law with prescribed ``exponent`` (mean log offset).

    ``stderr`` is the standard error of the fitted log amplitude.
    """
    m = np.asarray(m, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    md, yd = log_decimate(m, y, window, per_decade=per_decade, average=average)
    if md.size < min_points:
        raise ValueError(f"window [{window.m_lo:g}, {window.m_hi:g}] holds only {md.size} points")
    if np.any(yd <= 0):
        raise DomainError("values must be positive in the fit window")
    offs = np.log(yd) - exponent * np.log(md)
    intercept = float(offs.mean())
    resid = offs - intercept
    rms = math.sqrt(float(resid @ resid) / offs.size)
    se = float(resid.std(ddof=1)) / math.sqrt(offs.size) if offs.size > 1 else math.inf
    return ScalingReport(exponent, se, window, rms, regime, intercept, int(offs.size))


def default_windows(m1_star: float, m2_star: float | None = None) -> tuple[FitWindow, FitWindow | None]:
    """Early window ``[m1/10, m1/2]`` and intermediate window ``[3 m1, m2/3]``.

    The intermediate window is ``None`` when ``m2_star`` is unknown or too close
    to ``m1_star``.
    """
    early = FitWindow(m1_star / 10.0, m1_star / 2.0)
    if m2_star is None or m2_star / 3.0 <= 3.0 * m1_star:
        return early, None
    return early, FitWindow(3.0 * m1_star, m2_star / 3.0)


# --------------------------------------------------------------------------- m1*


def _split_search(lx: NDArray, ly: NDArray, e1: float, e2: float, min_side: int) -> int:
    """Index splitting the points into two fixed-slope branches with least squared error."""
    best, best_sse = -1, math.inf
    off1 = ly - e1 * lx
    off2 = ly - e2 * lx
    for c in range(min_side, lx.size - min_side + 1):
        a, b = off1[:c], off2[c:]
        sse = float(((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum())
        if sse < best_sse:
            best, best_sse = c, sse
    return best


def detect_crossover_m1(
    m: ArrayLike,
    F: ArrayLike,
    N: int,
    mean_tau: float,
    *,
    early_exponent: float = -3.0,
    late_exponent: float = -2.5,
    m_min: float = 10.0,
    m_max: float | None = None,
    per_decade: int = 40,
) -> CrossoverM1:
    """Crossover between the ``m^-3`` and ``m^-5/2`` branches of ``F_m``.

    The series is averaged over logarithmic bins on ``[m_min, m_max]`` and split
    into two branches with the prescribed exponents.  The split minimises the
    total squared log residual, and each branch's amplitude is fitted with its
    exponent held fixed.  When the two fitted power laws intersect within one
    bin of the split (a continuous crossover) the intersection is returned.
    Otherwise the branches are joined by a jump and the estimate is the
    geometric midpoint of the two bins that straddle it.

    The estimate is conclusive only if free fits in ``[m*/10, m*/2]`` and
    ``[3 m*, 30 m*]`` give exponents differing by more than twice their combined
    standard error.

    Returns
    -------
    CrossoverM1
        ``rescaled`` is ``m_star * mean_tau / N``.
    """
    m = np.asarray(m, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    hi = m[-1] if m_max is None else min(float(m_max), m[-1])
    span = FitWindow(max(m_min, m[0]), hi)
    md, yd = log_decimate(m, F, span, per_decade=per_decade, average=True)
    ok = yd > 0
    md, yd = md[ok], yd[ok]

    def fail(reason: str, estimate: float = math.nan) -> CrossoverM1:
        return CrossoverM1(estimate, estimate * mean_tau / N, False, reason)

    min_side = max(3, per_decade // 4)
    if md.size < 2 * min_side:
        return fail("series too short to hold two branches")
    lx, ly = np.log(md), np.log(yd)
    c = _split_search(lx, ly, early_exponent, late_exponent, min_side)
    a_early = float(np.mean(ly[:c] - early_exponent * lx[:c]))
    a_late = float(np.mean(ly[c:] - late_exponent * lx[c:]))
    cross = math.exp((a_late - a_early) / (early_exponent - late_exponent))
    lo_edge, hi_edge = md[max(c - 2, 0)], md[min(c + 1, md.size - 1)]
    est = cross if lo_edge <= cross <= hi_edge else float(math.sqrt(md[c - 1] * md[c]))

    w1 = FitWindow(max(est / 10.0, span.m_lo), max(est / 2.0, span.m_lo * 1.5))
    w2_hi = min(30.0 * est, hi)
    if 3.0 * est * 1.5 >= w2_hi:
        return fail("series ends before the late branch is resolved", est)
    w2 = FitWindow(3.0 * est, w2_hi)
    try:
        free1 = fit_power_law(m, F, w1, regime="early", per_decade=per_decade, average=True)
        free2 = fit_power_law(m, F, w2, regime="intermediate", per_decade=per_decade, average=True)
    except (ValueError, DomainError) as exc:
        return fail(f"cannot test branch separation: {exc}", est)
    gap = abs(free1.exponent - free2.exponent)
    joint = math.hypot(free1.stderr, free2.stderr)
    if not gap > 2.0 * joint:
        return CrossoverM1(est, est * mean_tau / N, False, "branch exponents not separable", free1, free2)
    return CrossoverM1(est, est * mean_tau / N, True, "", free1, free2)


# --------------------------------------------------------------------------- m2*


def _departure(
    m: NDArray, S: NDArray, m_lo: float, exponent: float | None, per_decade: int, persist: int, threshold: float
) -> tuple[float, ScalingReport | None, str]:
    if m_lo >= m[-1]:
        return math.nan, None, "series ends before m_lo"
    md, yd = log_decimate(m, S, FitWindow(m_lo, m[-1]), per_decade=per_decade, average=True)
    if md.size < MIN_POINTS:
        return math.nan, None, "too few points beyond m_lo"
    m_hi = md[-1]
    seen: list[float] = []
    fit: ScalingReport | None = None
    for _ in range(50):
        if m_hi <= m_lo * 10 ** (MIN_POINTS / per_decade):
            return math.nan, fit, "power-law window shrank below the minimum span"
        w = FitWindow(m_lo, m_hi)
        try:
            if exponent is None:
                fit = fit_power_law(m, S, w, per_decade=per_decade, average=True)
            else:
                fit = fit_fixed_exponent(m, S, w, exponent, per_decade=per_decade, min_points=MIN_POINTS)
        except (ValueError, DomainError) as exc:
            return math.nan, fit, f"power-law window collapsed: {exc}"
        with np.errstate(divide="ignore"):
            log_ratio = np.log(np.maximum(yd, 1e-300)) - (fit.intercept + fit.exponent * np.log(md))
        below = log_ratio < math.log(threshold)
        idx = -1
        for i in range(below.size - persist + 1):
            if md[i] > m_lo and below[i : i + persist].all():
                idx = i
                break
        if idx < 0:
            return math.nan, fit, "exponential tail not reached"
        if idx == 0:
            est = float(md[0])
        else:
            x0, x1 = math.log(md[idx - 1]), math.log(md[idx])
            r0, r1 = float(log_ratio[idx - 1]), float(log_ratio[idx])
            frac = (math.log(threshold) - r0) / (r1 - r0) if r1 != r0 else 1.0
            est = math.exp(x0 + min(max(frac, 0.0), 1.0) * (x1 - x0))
        new_hi = est / 3.0
        if any(abs(math.log(est / s)) < 1e-9 for s in seen):
            return est, fit, ""
        seen.append(est)
        m_hi = new_hi
    return est, fit, ""


def detect_crossover_m2(
    family: Mapping[int, tuple[ArrayLike, ArrayLike]],
    m_lo: Mapping[int, float] | float,
    *,
    exponent: float | None = -1.5,
    per_decade: int = 20,
    persist: int = 5,
    threshold: float = math.exp(-1.0),
) -> CrossoverM2:
    """Locate the exponential onset ``m2*`` for each ring size and regress ``log m2*`` on ``log N``.

    For each member a power law (exponent fixed at ``exponent``, or free when
    ``None``) is fitted on ``[m_lo, m2*/3]``.  ``m2*`` is where the ratio of the
    series to that fit first falls below ``threshold`` and stays below for
    ``persist`` consecutive decimated points.  The window and estimate are
    iterated to self-consistency.

    ``delta_stderr`` combines the regression standard error with the
    resolution of the decimation grid, ``ln(10) / per_decade / sqrt(12)`` in
    ``log m2*``.
    """
    sizes = tuple(sorted(int(n) for n in family))
    m_star: dict[int, float] = {}
    conclusive: dict[int, bool] = {}
    fits: dict[int, ScalingReport] = {}
    reasons = []
    for N in sizes:
        m, S = family[N]
        m = np.asarray(m, dtype=np.float64)
        S = np.asarray(S, dtype=np.float64)
        lo = float(m_lo[N]) if isinstance(m_lo, Mapping) else float(m_lo)
        est, fit, why = _departure(m, S, lo, exponent, per_decade, persist, threshold)
        m_star[N] = est
        conclusive[N] = math.isfinite(est)
        if fit is not None:
            fits[N] = fit
        if why:
            reasons.append(f"N={N}: {why}")
    good = [N for N in sizes if conclusive[N]]
    delta, se = math.nan, math.nan
    if len(good) >= 2:
        x = np.log(np.array(good, dtype=np.float64))
        y = np.log(np.array([m_star[N] for N in good]))
        A = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        delta = float(coef[0])
        sxx = float(np.sum((x - x.mean()) ** 2))
        resid = y - A @ coef
        s_reg = math.sqrt(float(resid @ resid) / (x.size - 2) / sxx) if x.size > 2 else 0.0
        s_grid = math.log(10.0) / per_decade / math.sqrt(12.0) / math.sqrt(sxx)
        se = math.hypot(s_reg, s_grid)
    elif not reasons:
        reasons.append("fewer than two conclusive ring sizes")
    return CrossoverM2(sizes, m_star, conclusive, delta, se, fits, "; ".join(reasons))


# --------------------------------------------------------------------------- collapse


def _smoothed_log_curve(m, y, per_decade: int) -> tuple[NDArray, NDArray]:
    m = np.asarray(m, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    md, yd = log_decimate(m, y, per_decade=per_decade, average=True)
    ok = yd > 0
    return np.log(md[ok]), np.log(yd[ok])


def _spread(curves: Sequence[tuple[NDArray, NDArray]], n_grid: int) -> float:
    lo = max(c[0][0] for c in curves)
    hi = min(c[0][-1] for c in curves)
    if not hi > lo:
        raise ValueError("curves have no common support")
    grid = np.linspace(lo, hi, n_grid)
    stack = np.array([np.interp(grid, lx, ly) for lx, ly in curves])
    return float(np.mean(stack.var(axis=0)))


def collapse_score(
    curves: Mapping[int, tuple[ArrayLike, ArrayLike]],
    x_scale: Mapping[int, float],
    *,
    y_scale: Mapping[int, float] | None = None,
    per_decade: int = 20,
    n_grid: int = 64,
) -> CollapseResult:
    """Quality of the collapse ``(m, y) -> (m * x_scale, y * y_scale)``.

    Each curve is averaged over logarithmic bins, then all curves are
    interpolated in log-log coordinates onto a common grid spanning their
    shared abscissa range.  The score is the mean over that grid of the
    variance of ``log y`` across curves, computed both after rescaling and for
    the raw curves.

    Raises
    ------
    ValueError
        With fewer than two curves or when the abscissa ranges do not overlap.
    """
    if len(curves) < 2:
        raise ValueError("need at least two curves")
    raw, scaled = [], []
    for key, (m, y) in curves.items():
        lx, ly = _smoothed_log_curve(m, y, per_decade)
        raw.append((lx, ly))
        dy = 0.0 if y_scale is None else math.log(y_scale[key])
        scaled.append((lx + math.log(x_scale[key]), ly + dy))
    return CollapseResult(_spread(scaled, n_grid), _spread(raw, n_grid))


# --------------------------------------------------------------------------- oscillations


def oscillation_amplitude(m: ArrayLike, values: ArrayLike, window: FitWindow, *, degree: int = 3) -> float:
    """Root-mean-square wiggle of ``log values`` about a smooth trend.

    The trend is a polynomial of the given degree in ``log m`` fitted over every
    sample inside ``window`` (no decimation, so period-scale structure stays
    visible).  A smooth power law gives 0.

    Raises
    ------
    DomainError
        If a value in the window is not positive.
    ValueError
        If the window holds too few samples for the trend.
    """
    m = np.asarray(m, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    sel = (m >= window.m_lo) & (m <= window.m_hi)
    if int(sel.sum()) <= degree + 1:
        raise ValueError(f"window [{window.m_lo:g}, {window.m_hi:g}] holds too few samples")
    if np.any(y[sel] <= 0):
        raise DomainError("values must be positive in the window")
    lx, ly = np.log(m[sel]), np.log(y[sel])
    res = ly - np.polyval(np.polyfit(lx, ly, degree), lx)
    return float(np.sqrt(np.mean(res * res)))

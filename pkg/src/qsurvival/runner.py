"""Subcommand implementations: turn a :class:`RunConfig` into data files and a manifest.

Every command writes into one output directory from the calling process only.
Data files hold no timestamps, so equal configs and seeds give byte-identical
files; ``manifest.json`` records their SHA-256 sums next to the run metadata.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__, analytics, qrw, scaling, tbm
from .config import RunConfig, dump_config
from .engine import Checkpoint, EnsembleResult, QrwModel, Scheme, TbmModel, run_ensemble
from .errors import ConfigurationError
from .intervals import Divergent

__all__ = [
    "CSV_SCHEMA_VERSION",
    "PROPAGATE_HEADER",
    "SURVIVAL_HEADER",
    "SURVIVAL_CLOSED_FORM_HEADER",
    "RATE_FUNCTION_HEADER",
    "CommandResult",
    "apply_overrides",
    "cmd_propagate",
    "cmd_survival",
    "cmd_scan",
    "cmd_rate_function",
    "cmd_synthetic",
]

CSV_SCHEMA_VERSION = 1
PROPAGATE_HEADER = ("n", "P_n_closed_form", "P_n_direct", "abs_diff")
SURVIVAL_HEADER = ("m", "S_mean", "S_typical", "F_mean", "F_typical")
SURVIVAL_CLOSED_FORM_HEADER = SURVIVAL_HEADER + ("S_closed_form", "S_typ_closed_form")
RATE_FUNCTION_HEADER = ("x", "I")

#: Smallest m used when comparing compensated first-detection curves across sizes.
COLLAPSE_M_MIN = 10

#: Analytic expectations truncate the interval law where this much mass is left.
ANALYTIC_TAIL = 1e-9


@dataclass
class CommandResult:
    """Outcome of a subcommand: files written and whether every analysis was conclusive."""

    out_dir: Path
    outputs: dict[str, Path] = field(default_factory=dict)
    conclusive: bool = True
    report: dict[str, Any] = field(default_factory=dict)


def apply_overrides(
    cfg: RunConfig, *, seed: int | None = None, workers: int | None = None, out: str | None = None
) -> RunConfig:
    """Command-line flags take precedence over the ``[run]`` table."""
    run = cfg.run
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigurationError("--seed must be an unsigned 64-bit integer")
        run = replace(run, master_seed=seed)
    if workers is not None:
        if workers < 1:
            raise ConfigurationError("--workers must be at least 1")
        run = replace(run, workers=workers)
    if out is not None:
        run = replace(run, out=out)
    return replace(cfg, run=run)


# --------------------------------------------------------------------------- writing


def _fmt(x: Any) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Divergent):
        return obj.value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class _Writer:
    """The single writer of one run's output directory."""

    def __init__(self, cfg: RunConfig, command: str) -> None:
        self.cfg = cfg
        self.command = command
        self.dir = Path(cfg.run.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.started = datetime.now(timezone.utc).isoformat()
        self.result = CommandResult(self.dir)

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        tmp.replace(path)
        self.result.outputs[name] = path
        return path

    def finish(self) -> CommandResult:
        manifest = {
            "command": self.command,
            "tool": "qsurvival",
            "version": __version__,
            "csv_schema": CSV_SCHEMA_VERSION,
            "config_sha256": self.cfg.digest(),
            "config": dump_config(self.cfg),
            "master_seed": self.cfg.run.master_seed,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "conclusive": self.result.conclusive,
            "outputs": {name: _sha256(path) for name, path in sorted(self.result.outputs.items())},
        }
        path = self.dir / "manifest.json"
        path.write_text(_json_text(manifest))
        return self.result


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --------------------------------------------------------------------------- propagate


def cmd_propagate(cfg: RunConfig) -> CommandResult:
    """Site occupation at time ``[propagate].t`` from two independent routes.

    The coined walk compares the closed-form mode sum with step-by-step
    evolution; the tight-binding ring compares the mode sum with direct ODE
    integration of the site-space Schroedinger equation.
    """
    cfg.require("model", "propagate")
    mc = cfg.model
    assert mc is not None and cfg.propagate is not None
    t = cfg.propagate.t
    model = mc.build()
    if isinstance(model, QrwModel):
        if t != int(t):
            raise ConfigurationError("[propagate].t must be a whole number of steps for the coined walk")
        up, down = qrw.amplitude_closed_form(model.init, model.coin, model.N, int(t))
        closed = np.abs(up) ** 2 + np.abs(down) ** 2
        direct = qrw.site_occupation(qrw.evolve_direct(model.initial_state(), model.coin, int(t)))
    else:
        amp = tbm.propagator_amplitude(model.params, np.arange(model.N), model.n0, t)
        closed = np.abs(amp) ** 2
        direct = tbm.site_occupation(tbm.evolve_ode(model.initial_state(), model.params, t))
    diff = np.abs(closed - direct)
    w = _Writer(cfg, "propagate")
    rows = zip(range(model.N), closed, direct, diff)
    w.write("propagate.csv", _csv_text(PROPAGATE_HEADER, rows))
    w.result.report = {"max_abs_diff": float(diff.max()), "norm_closed_form": float(closed.sum())}
    w.write("propagate_report.json", _json_text(w.result.report))
    return w.finish()


# --------------------------------------------------------------------------- survival


def _survival_rows(e: EnsembleResult, extra: Sequence[np.ndarray] = ()) -> list[list[Any]]:
    S = e.mean_survival
    # Row-wise F_m = S_{m-1} - S_m holds exactly for the mean columns.
    F = np.concatenate([[1.0], S[:-1]]) - S
    cols = [e.m, S, e.typical_survival, F, e.typical_first_detection, *extra]
    return [list(r) for r in zip(*cols)]


def _ensemble(cfg: RunConfig, model: QrwModel | TbmModel, m_max: int, checkpoint_name: str) -> EnsembleResult:
    assert cfg.law is not None
    ck = Checkpoint(Path(cfg.run.out) / "checkpoints" / checkpoint_name, cfg.run.checkpoint_seconds)
    return run_ensemble(
        model,
        cfg.scheme,
        cfg.law,
        m_max,
        cfg.run.realizations,
        cfg.run.master_seed,
        workers=cfg.run.workers,
        keep_traces=cfg.run.keep_traces,
        checkpoint=ck,
    )


def cmd_survival(cfg: RunConfig) -> CommandResult:
    """Ensemble survival and first-detection series; Scheme 1 adds the closed forms."""
    cfg.require("model", "law")
    assert cfg.model is not None and cfg.law is not None
    model = cfg.model.build()
    e = _ensemble(cfg, model, cfg.run.m_max, "survival.npz")
    w = _Writer(cfg, "survival")
    if cfg.scheme is Scheme.PROJECTED:
        kw = {"period": model.period, "tail_tol": ANALYTIC_TAIL}
        avg = analytics.average_survival(cfg.law, model.q_return, e.m, **kw)
        typ = analytics.typical_survival(cfg.law, model.q_return, e.m, **kw)
        text = _csv_text(SURVIVAL_CLOSED_FORM_HEADER, _survival_rows(e, [avg, typ]))
    else:
        text = _csv_text(SURVIVAL_HEADER, _survival_rows(e))
    w.write("survival.csv", text)
    if cfg.run.keep_traces:
        w.write("traces.csv", _csv_text(["m", *(f"S_{i}" for i in range(e.traces.shape[0]))], zip(e.m, *e.traces)))
    return w.finish()


# --------------------------------------------------------------------------- scan


def _fit(m, y, window, regime) -> dict[str, Any]:
    try:
        r = scaling.fit_power_law(m, y, window, regime=regime, average=True)
    except (ValueError, ArithmeticError) as exc:
        return {"window": [window.m_lo, window.m_hi], "error": str(exc)}
    return {
        "window": [window.m_lo, window.m_hi],
        "exponent": r.exponent,
        "stderr": r.stderr,
        "residual": r.residual,
        "n_points": r.n_points,
    }


def _window(spec: Sequence[float]) -> scaling.FitWindow | None:
    return scaling.FitWindow(float(spec[0]), float(spec[1])) if spec else None


def cmd_scan(cfg: RunConfig) -> CommandResult:
    """Run the N-family and extract exponents, crossovers and collapse quality."""
    cfg.require("model", "law", "scan")
    assert cfg.model is not None and cfg.law is not None and cfg.scan is not None
    sc = cfg.scan
    if len(sc.sizes) < 1:
        raise ConfigurationError("[scan].sizes must list at least one lattice size")
    mean_tau = cfg.law.mean()
    if isinstance(mean_tau, Divergent):
        raise ConfigurationError("crossover scans need an interval law with a finite mean")
    w = _Writer(cfg, "scan")
    series: dict[int, EnsembleResult] = {}
    for i, N in enumerate(sc.sizes):
        model = cfg.model.with_size(N).build()
        m_max = sc.m_max[i] if sc.m_max else cfg.run.m_max
        series[N] = e = _ensemble(cfg, model, m_max, f"scan_N{N}.npz")
        w.write(f"scan_N{N}.csv", _csv_text(SURVIVAL_HEADER, _survival_rows(e)))

    report: dict[str, Any] = {"sizes": list(sc.sizes), "mean_tau": mean_tau, "per_size": {}}
    m1: dict[int, float] = {}
    for N, e in series.items():
        entry: dict[str, Any] = {}
        F = e.mean_first_detection
        if sc.detect_m1:
            c = scaling.detect_crossover_m1(e.m, F, N, mean_tau, m_max=sc.m1_m_max_factor * N / mean_tau)
            entry["m1"] = {"m_star": c.m_star, "rescaled": c.rescaled, "conclusive": c.conclusive, "reason": c.reason}
            w.result.conclusive &= c.conclusive
            if math.isfinite(c.m_star):
                m1[N] = c.m_star
        early = _window(sc.early_window)
        inter = _window(sc.intermediate_window)
        if N in m1 and early is None:
            early = scaling.default_windows(m1[N])[0]
        if N in m1 and inter is None and 3.0 * m1[N] < e.m[-1]:
            # No m2* estimate per size here, so the window runs to the end of the series.
            inter = scaling.FitWindow(3.0 * m1[N], float(e.m[-1]))
        fits = {}
        if early is not None:
            fits["early_F"] = _fit(e.m, F, early, "early")
        if inter is not None:
            fits["intermediate_S"] = _fit(e.m, e.mean_survival, inter, "intermediate")
            fits["intermediate_F"] = _fit(e.m, F, inter, "intermediate")
        entry["fits"] = fits
        report["per_size"][N] = entry

    if sc.detect_m2:
        missing = [N for N in series if N not in m1]
        if missing:
            report["m2"] = {"conclusive": False, "reason": f"no m1 estimate for N = {missing}"}
            w.result.conclusive = False
        else:
            family = {N: (e.m, e.mean_survival) for N, e in series.items()}
            r = scaling.detect_crossover_m2(family, {N: sc.m2_m_lo_factor * m1[N] for N in series})
            report["m2"] = {
                "m_star": r.m_star,
                "delta": r.delta,
                "delta_stderr": r.delta_stderr,
                "conclusive": r.all_conclusive,
                "reason": r.reason,
            }
            w.result.conclusive &= r.all_conclusive

    if len(series) >= 2:
        curves = {}
        for N, e in series.items():
            keep = e.m >= COLLAPSE_M_MIN
            curves[N] = (e.m[keep], e.m[keep] ** 3.0 * e.mean_first_detection[keep])
        try:
            cs = scaling.collapse_score(curves, {N: mean_tau / N for N in series})
            report["collapse"] = {"rescaled": cs.rescaled, "unrescaled": cs.unrescaled, "improvement": cs.improvement}
        except ValueError as exc:
            report["collapse"] = {"error": str(exc)}
            w.result.conclusive = False
    w.result.report = report
    w.write("scan_report.json", _json_text(report))
    return w.finish()


# --------------------------------------------------------------------------- rate function


def cmd_rate_function(cfg: RunConfig) -> CommandResult:
    """Large-deviation rate function of ``(1/m) log S_m`` for a finite interval law."""
    cfg.require("model", "rate_function")
    assert cfg.model is not None and cfg.rate_function is not None
    rf = cfg.rate_function
    model = cfg.model.build()
    try:
        bern = analytics.BernoulliLaw(np.asarray(rf.taus, float), np.asarray(rf.probs, float))
    except ValueError as exc:
        raise ConfigurationError(f"[rate_function]: {exc}") from exc
    q = np.asarray(model.q_return(bern.taus), dtype=np.float64)
    curve = analytics.rate_function_curve(bern, q, n_points=rf.n_points, method=rf.method)
    x_star = analytics.ld_minimizer(bern, q)
    w = _Writer(cfg, "rate-function")
    w.write("rate_function.csv", _csv_text(RATE_FUNCTION_HEADER, [(pt.x, pt.I) for pt in curve]))
    w.result.report = {
        "taus": list(rf.taus),
        "probs": list(rf.probs),
        "q": q.tolist(),
        "x_star": x_star,
        "I_at_x_star": analytics.ld_rate_function(bern, q, x_star, method=rf.method),
        "method": rf.method,
    }
    w.write("rate_function_report.json", _json_text(w.result.report))
    return w.finish()


# --------------------------------------------------------------------------- synthetic


def planted_first_detection(m: np.ndarray, m1: float) -> np.ndarray:
    """Continuous ``m^-3 -> m^-5/2`` join at ``m1``."""
    return np.where(m < m1, m**-3.0, m1**-0.5 * m**-2.5)


def planted_survival(m: np.ndarray, m2: float) -> np.ndarray:
    """``m^-3/2 exp(-m / m2)``."""
    return m**-1.5 * np.exp(-m / m2)


def cmd_synthetic(cfg: RunConfig) -> CommandResult:
    """Run the scaling analysis on series with planted exponents and crossovers."""
    cfg.require("synthetic")
    sy = cfg.synthetic
    assert sy is not None
    m = np.arange(1, sy.m_max + 1, dtype=np.float64)
    F = planted_first_detection(m, sy.m1)
    w = _Writer(cfg, "synthetic")
    report: dict[str, Any] = {"planted": {"m1": sy.m1, "delta": sy.delta, "early": -3.0, "late": -2.5}}
    early = _fit(m, F, scaling.FitWindow(sy.m1 / 10.0, sy.m1 / 2.0), "early")
    late = _fit(m, F, scaling.FitWindow(3.0 * sy.m1, float(sy.m_max)), "intermediate")
    c = scaling.detect_crossover_m1(m, F, 1, 1.0)
    report["m1"] = {"m_star": c.m_star, "conclusive": c.conclusive, "reason": c.reason}
    report["fits"] = {"early_F": early, "late_F": late}
    w.result.conclusive &= c.conclusive

    family = {}
    m2_true = {}
    for N in sy.sizes:
        m2_true[N] = N**sy.delta / sy.m2_prefactor
        mm = np.arange(1, int(20 * m2_true[N]) + 1, dtype=np.float64)
        family[N] = (mm, planted_survival(mm, m2_true[N]))
    r = scaling.detect_crossover_m2(family, 1.0)
    report["m2"] = {
        "planted": m2_true,
        "m_star": r.m_star,
        "delta": r.delta,
        "delta_stderr": r.delta_stderr,
        "conclusive": r.all_conclusive,
        "reason": r.reason,
    }
    w.result.conclusive &= r.all_conclusive
    w.result.report = report
    w.write("synthetic_report.json", _json_text(report))
    return w.finish()

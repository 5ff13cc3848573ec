"""Declarative run configuration stored as TOML.

A config file has one table per concern::

    [model]            kind = "qrw" | "tbm" and the model parameters
    [law]              kind = <interval law kind> and its parameters
    [run]              scheme, m_max, realizations, master_seed, workers, out, ...
    [propagate]        t, and the optional comparison route
    [scan]             sizes, windows and crossover requests
    [rate_function]    taus, probs, grid density
    [synthetic]        planted exponents and crossovers for the self-test

Only the tables needed by a subcommand have to be present.  Unknown tables or
keys are errors and are reported with the line they appear on.  Complex
amplitudes are written as ``[re, im]`` pairs, angles in radians (``theta``) or
degrees (``theta_deg``, converted on load).
"""

from __future__ import annotations

import hashlib
import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import tomli_w

from . import qrw, tbm
from .engine import QrwModel, Scheme, TbmModel
from .errors import ConfigurationError
from .intervals import LAW_KINDS, IntervalLaw, law_from_record

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ModelConfig",
    "RunSettings",
    "PropagateSettings",
    "ScanSettings",
    "RateFunctionSettings",
    "SyntheticSettings",
    "RunConfig",
    "load_config",
    "parse_config",
    "dump_config",
]


def _complex(value: Any, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(float(value), 0.0)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(float(value[0]), float(value[1]))
    raise ConfigurationError(f"{where}: expected a number or an [re, im] pair, got {value!r}")


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True)
class ModelConfig:
    """Model choice and parameters; fields not used by ``kind`` keep their defaults."""

    kind: str
    N: int
    theta: float = math.radians(80.0)
    a: complex = 1.0 + 0.0j
    b: complex = 1.0j
    n0: int = 0
    gamma: float = 1.0

    def build(self) -> QrwModel | TbmModel:
        try:
            if self.kind == "qrw":
                return QrwModel(self.N, qrw.CoinAngle(self.theta), qrw.SpinorInit(self.a, self.b, self.n0))
            return TbmModel(tbm.TbmParams(self.N, self.gamma), self.n0)
        except ValueError as exc:
            raise ConfigurationError(f"[model]: {exc}") from exc

    def with_size(self, N: int) -> "ModelConfig":
        return ModelConfig(self.kind, N, self.theta, self.a, self.b, self.n0, self.gamma)

    def to_table(self) -> dict[str, Any]:
        if self.kind == "qrw":
            return {"kind": "qrw", "N": self.N, "theta": self.theta, "a": _pair(self.a), "b": _pair(self.b), "n0": self.n0}
        return {"kind": "tbm", "N": self.N, "gamma": self.gamma, "n0": self.n0}


@dataclass(frozen=True)
class RunSettings:
    scheme: str = "leftover"
    m_max: int = 100
    realizations: int = 1
    master_seed: int = 0
    workers: int = 1
    keep_traces: int = 0
    checkpoint_seconds: float = 60.0
    out: str = "out"


@dataclass(frozen=True)
class PropagateSettings:
    t: float = 0.0


@dataclass(frozen=True)
class ScanSettings:
    """N-family scan.  ``m_max`` overrides ``[run].m_max`` per size when given."""

    sizes: tuple[int, ...] = ()
    m_max: tuple[int, ...] = ()
    detect_m1: bool = True
    detect_m2: bool = False
    m1_m_max_factor: float = 100.0
    m2_m_lo_factor: float = 3.0
    early_window: tuple[float, ...] = ()
    intermediate_window: tuple[float, ...] = ()


@dataclass(frozen=True)
class RateFunctionSettings:
    taus: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    n_points: int = 101
    method: str = "contraction"


@dataclass(frozen=True)
class SyntheticSettings:
    """Planted crossover series: ``m^-3 -> m^-5/2`` at ``m1`` and ``m^-3/2 exp(-m/m2)``."""

    m1: float = 75.0
    m_max: int = 10_000
    sizes: tuple[int, ...] = (16, 24, 32)
    delta: float = 3.0
    m2_prefactor: float = 2.0


_TABLES = {
    "run": RunSettings,
    "propagate": PropagateSettings,
    "scan": ScanSettings,
    "rate_function": RateFunctionSettings,
    "synthetic": SyntheticSettings,
}

_MODEL_KEYS = {
    "qrw": {"kind", "N", "theta", "theta_deg", "a", "b", "n0"},
    "tbm": {"kind", "N", "gamma", "n0"},
}


@dataclass(frozen=True)
class RunConfig:
    """A parsed config.  Optional tables are ``None`` when absent from the file."""

    model: ModelConfig | None = None
    law: IntervalLaw | None = None
    run: RunSettings = field(default_factory=RunSettings)
    propagate: PropagateSettings | None = None
    scan: ScanSettings | None = None
    rate_function: RateFunctionSettings | None = None
    synthetic: SyntheticSettings | None = None

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigurationError(f"config lacks required table(s): {', '.join('[' + n + ']' for n in missing)}")

    @property
    def scheme(self) -> Scheme:
        return Scheme.parse(self.run.scheme)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if self.model is not None:
            out["model"] = self.model.to_table()
        if self.law is not None:
            out["law"] = self.law.to_record()
        out["run"] = _plain(asdict(self.run))
        for name in ("propagate", "scan", "rate_function", "synthetic"):
            value = getattr(self, name)
            if value is not None:
                out[name] = _plain(asdict(value))
        return out

    def digest(self) -> str:
        """SHA-256 of the canonical TOML rendering."""
        return hashlib.sha256(dump_config(self).encode()).hexdigest()


def _plain(d: Mapping[str, Any]) -> dict[str, Any]:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# --------------------------------------------------------------------------- parsing


class _Source:
    """Raw text kept around to point errors at a line."""

    def __init__(self, text: str, name: str) -> None:
        self.lines = text.splitlines()
        self.name = name

    def where(self, table: str, key: str | None = None) -> str:
        header = re.compile(r"^\s*\[\s*" + re.escape(table) + r"\s*\]\s*(#.*)?$")
        in_table = False
        for i, line in enumerate(self.lines, start=1):
            if re.match(r"^\s*\[", line):
                in_table = bool(header.match(line))
                if in_table and key is None:
                    return f"{self.name}:{i}"
                continue
            if in_table and key is not None and re.match(r"^\s*" + re.escape(key) + r"\s*=", line):
                return f"{self.name}:{i}"
        return self.name


def _settings(cls, table: str, raw: Mapping[str, Any], src: _Source):
    known = {f.name: f for f in fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigurationError(f"{src.where(table, key)}: unknown key {key!r} in [{table}]")
        default = known[key].default
        if isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigurationError(f"{src.where(table, key)}: [{table}].{key} must be a list")
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                raise ConfigurationError(f"{src.where(table, key)}: [{table}].{key} must hold numbers")
            value = tuple(value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigurationError(f"{src.where(table, key)}: [{table}].{key} must be true or false")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigurationError(f"{src.where(table, key)}: [{table}].{key} must be an integer")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigurationError(f"{src.where(table, key)}: [{table}].{key} must be a number")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigurationError(f"{src.where(table, key)}: [{table}].{key} must be a string")
        kwargs[key] = value
    return cls(**kwargs)


def _model(raw: Mapping[str, Any], src: _Source) -> ModelConfig:
    kind = raw.get("kind")
    if kind not in _MODEL_KEYS:
        raise ConfigurationError(f"{src.where('model', 'kind')}: [model].kind must be 'qrw' or 'tbm', got {kind!r}")
    for key in raw:
        if key not in _MODEL_KEYS[kind]:
            raise ConfigurationError(f"{src.where('model', key)}: unknown key {key!r} for a {kind} model")
    N = raw.get("N")
    if isinstance(N, bool) or not isinstance(N, int):
        raise ConfigurationError(f"{src.where('model', 'N')}: [model].N must be an integer")
    n0 = raw.get("n0", 0)
    if isinstance(n0, bool) or not isinstance(n0, int):
        raise ConfigurationError(f"{src.where('model', 'n0')}: [model].n0 must be an integer")
    if kind == "tbm":
        gamma = raw.get("gamma", 1.0)
        if isinstance(gamma, bool) or not isinstance(gamma, (int, float)):
            raise ConfigurationError(f"{src.where('model', 'gamma')}: [model].gamma must be a number")
        return ModelConfig("tbm", N, n0=n0, gamma=float(gamma))
    if "theta" in raw and "theta_deg" in raw:
        raise ConfigurationError(f"{src.where('model', 'theta_deg')}: give theta or theta_deg, not both")
    theta = math.radians(float(raw["theta_deg"])) if "theta_deg" in raw else float(raw.get("theta", math.radians(80.0)))
    a = _complex(raw.get("a", 1.0), src.where("model", "a"))
    b = _complex(raw.get("b", [0.0, 1.0]), src.where("model", "b"))
    return ModelConfig("qrw", N, theta, a, b, n0)


def parse_config(text: str, name: str = "<config>") -> RunConfig:
    """Parse and validate TOML text.

    Raises
    ------
    ConfigurationError
        On syntax errors, unknown tables or keys, wrong types, parameter values
        outside their domains, or a law the model cannot be measured with.
    """
    src = _Source(text, name)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{name}: {exc}") from exc
    for table in raw:
        if table not in (*_TABLES, "model", "law"):
            raise ConfigurationError(f"{src.where(table)}: unknown table [{table}]")
        if not isinstance(raw[table], dict):
            raise ConfigurationError(f"{src.where(table)}: {table!r} must be a table")

    model = _model(raw["model"], src) if "model" in raw else None
    law = None
    if "law" in raw:
        rec = raw["law"]
        if rec.get("kind") not in LAW_KINDS:
            raise ConfigurationError(f"{src.where('law', 'kind')}: unknown law kind {rec.get('kind')!r}; expected one of {sorted(LAW_KINDS)}")
        try:
            law = law_from_record(rec)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{src.where('law')}: {exc}") from exc
    parts = {t: _settings(cls, t, raw[t], src) for t, cls in _TABLES.items() if t in raw}
    cfg = RunConfig(model=model, law=law, **parts)
    _validate(cfg, src)
    return cfg


def _validate(cfg: RunConfig, src: _Source) -> None:
    run = cfg.run
    try:
        Scheme.parse(run.scheme)
    except ValueError as exc:
        raise ConfigurationError(f"{src.where('run', 'scheme')}: {exc}") from exc
    for key in ("m_max", "realizations", "workers"):
        if getattr(run, key) < 1:
            raise ConfigurationError(f"{src.where('run', key)}: [run].{key} must be at least 1")
    if not 0 <= run.master_seed < 2**64:
        raise ConfigurationError(f"{src.where('run', 'master_seed')}: master_seed must be an unsigned 64-bit integer")
    if run.keep_traces < 0:
        raise ConfigurationError(f"{src.where('run', 'keep_traces')}: keep_traces must be non-negative")
    if cfg.model is not None:
        model = cfg.model.build()
        if cfg.law is not None:
            try:
                model.check_law(cfg.law)
            except ConfigurationError as exc:
                raise ConfigurationError(f"{src.where('law')}: {exc}") from exc
    if cfg.scan is not None:
        sc = cfg.scan
        if any(n < 2 for n in sc.sizes):
            raise ConfigurationError(f"{src.where('scan', 'sizes')}: sizes must be integers >= 2")
        if sc.m_max and len(sc.m_max) != len(sc.sizes):
            raise ConfigurationError(f"{src.where('scan', 'm_max')}: [scan].m_max needs one entry per size")
        for key in ("early_window", "intermediate_window"):
            w = getattr(sc, key)
            if w and not (len(w) == 2 and 0 < w[0] < w[1]):
                raise ConfigurationError(f"{src.where('scan', key)}: [scan].{key} must be [m_lo, m_hi] with 0 < m_lo < m_hi")
    if cfg.propagate is not None and cfg.propagate.t < 0:
        raise ConfigurationError(f"{src.where('propagate', 't')}: t must be non-negative")
    if cfg.rate_function is not None:
        rf = cfg.rate_function
        if len(rf.taus) != len(rf.probs) or not rf.taus:
            raise ConfigurationError(f"{src.where('rate_function')}: taus and probs must be non-empty and equally long")
        if rf.method not in ("contraction", "ansatz"):
            raise ConfigurationError(f"{src.where('rate_function', 'method')}: method must be 'contraction' or 'ansatz'")
        if rf.n_points < 3:
            raise ConfigurationError(f"{src.where('rate_function', 'n_points')}: n_points must be at least 3")


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, str(p))


def dump_config(cfg: RunConfig) -> str:
    """Canonical TOML text; :func:`parse_config` of the result equals ``cfg``."""
    return tomli_w.dumps(cfg.to_dict())

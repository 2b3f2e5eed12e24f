"""Scenario configuration: a TOML document parsed strictly.

Every key must be known; misspelled keys are rejected with a suggestion,
types are checked, and constraints are validated before anything runs.
All problems are collected and reported together with their key paths.

Example::

    experiment = "pricing-crosscheck"
    seed = 7
    output_dir = "results/pricing"

    [market]
    r = 0.05
    sigma = 0.2

    [grid]
    n = 1601

    [payoff]
    kind = "call"
    strike = 100.0
    spot = 100.0

Omitted sections and keys take the defaults below; a few experiments
override them (see ``EXPERIMENT_DEFAULTS``). Grid bounds left unset are
chosen automatically from the experiment's kernel or packet widths.
"""

from __future__ import annotations

import dataclasses
import difflib
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

__all__ = [
    "EXPERIMENTS",
    "EXPERIMENT_DEFAULTS",
    "ScenarioConfig",
    "parse_config",
    "default_config",
]

EXPERIMENTS = (
    "kernel-scan",
    "stationarity",
    "pricing-crosscheck",
    "mu-conservation",
    "budget",
    "mc-oracle",
    "qm-baseline",
)

# common names people reach for, mapped to the key they meant
_SYNONYMS = {
    "vol": "sigma",
    "volatility": "sigma",
    "rate": "r",
    "interest_rate": "r",
    "drift": "phi",
    "expected_return": "phi",
    "steps": "n_steps",
    "paths": "n_paths",
    "nodes": "n",
    "out": "output_dir",
    "outdir": "output_dir",
    "kind_of_experiment": "experiment",
}


@dataclass
class MarketSection:
    r: float = 0.05
    sigma: float = 0.2
    phi: float = 0.05


@dataclass
class GridSection:
    n: int = 801
    x_min: float | None = None
    x_max: float | None = None


@dataclass
class TimeSection:
    tau: float = 1.0
    n_steps: int = 400
    mu_target: float = 1.0
    tau_values: list[float] = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0])


@dataclass
class PayoffSection:
    kind: str = "call"
    strike: float = 100.0
    spot: float = 100.0
    center: float = 0.0
    width: float = 0.3


@dataclass
class ScanSection:
    x_prime: float = 0.0
    d_min: float = 0.0
    d_max: float = 10.0
    n_points: int = 101


@dataclass
class MonteCarloSection:
    s0: float = 1.0
    n_paths: int = 100_000
    n_steps: int = 1
    bins: int = 60
    drift_mode: str = "risk-neutral"


@dataclass
class QmSection:
    hbar: float = 1.0
    m: float = 1.0
    center: float = 0.0
    width: float = 1.0
    momentum: float = 1.5
    t_max: float = 5.0
    n_times: int = 26


@dataclass
class ScenarioConfig:
    experiment: str
    seed: int = 12345
    output_dir: str = "results"
    market: MarketSection = field(default_factory=MarketSection)
    grid: GridSection = field(default_factory=GridSection)
    time: TimeSection = field(default_factory=TimeSection)
    payoff: PayoffSection = field(default_factory=PayoffSection)
    scan: ScanSection = field(default_factory=ScanSection)
    mc: MonteCarloSection = field(default_factory=MonteCarloSection)
    qm: QmSection = field(default_factory=QmSection)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_SECTIONS = {
    "market": MarketSection,
    "grid": GridSection,
    "time": TimeSection,
    "payoff": PayoffSection,
    "scan": ScanSection,
    "mc": MonteCarloSection,
    "qm": QmSection,
}

EXPERIMENT_DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "stationarity": {"market": {"r": 0.0}},
    "mu-conservation": {
        "market": {"r": 0.02},
        "grid": {"n": 1601},
        "time": {"n_steps": 1000},
        "payoff": {"kind": "gaussian-bump", "width": 0.2},
    },
    "budget": {"payoff": {"kind": "gaussian-bump"}, "time": {"n_steps": 200}},
    "pricing-crosscheck": {"grid": {"n": 1601}, "time": {"n_steps": 2000}},
    "mc-oracle": {"market": {"r": 0.02}},
    "qm-baseline": {"grid": {"n": 2801}, "qm": {"n_times": 101}},
}

_CHOICES = {
    ("payoff", "kind"): ("call", "put", "digital", "gaussian-bump"),
    ("mc", "drift_mode"): ("risk-neutral", "physical"),
}


def _suggest(key: str, known) -> str:
    if key in _SYNONYMS and _SYNONYMS[key] in known:
        return f"; did you mean {_SYNONYMS[key]!r}?"
    close = difflib.get_close_matches(key, list(known), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


# Marks a value that failed type coercion; the default is kept so that the
# range checks can still run and every problem is reported in one pass.
_BAD = object()


def _coerce(value, annotation: str, path: str, problems) -> Any:
    ok = True
    if annotation in ("float", "float | None"):
        if value is None and annotation.endswith("None"):
            return None
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif annotation == "int":
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif annotation == "str":
        ok = isinstance(value, str)
    elif annotation == "list[float]":
        ok = isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        value = [float(v) for v in value] if ok else value
    if not ok:
        problems.append((path, f"expected {annotation}, got {type(value).__name__} {value!r}"))
        return _BAD
    return value


def _fill(cls, data: dict, prefix: str, base, problems):
    known = {f.name: f for f in dataclasses.fields(cls)}
    values = dataclasses.asdict(base)
    for key, val in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in known:
            problems.append((path, f"unknown key{_suggest(key, known)}"))
            continue
        val = _coerce(val, known[key].type, path, problems)
        if val is not _BAD:
            values[key] = val
    return cls(**values)


def _constraints(cfg: ScenarioConfig, problems):
    def need(cond, path, msg):
        if not cond:
            problems.append((path, msg))

    m, g, t, p, s, mc, qm = cfg.market, cfg.grid, cfg.time, cfg.payoff, cfg.scan, cfg.mc, cfg.qm
    need(cfg.experiment in EXPERIMENTS, "experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    need(cfg.seed >= 0, "seed", "must be >= 0")
    need(m.sigma > 0, "market.sigma", f"must be > 0 (got {m.sigma})")
    need(g.n >= 3, "grid.n", f"must be >= 3 (got {g.n})")
    if g.x_min is not None and g.x_max is not None:
        need(g.x_min < g.x_max, "grid.x_max", "must exceed grid.x_min")
    elif (g.x_min is None) != (g.x_max is None):
        problems.append(("grid", "set both x_min and x_max, or neither for automatic bounds"))
    need(t.tau > 0, "time.tau", f"must be > 0 (got {t.tau})")
    need(t.n_steps >= 1, "time.n_steps", "must be >= 1")
    need(t.mu_target > 0, "time.mu_target", "must be > 0")
    need(len(t.tau_values) > 0 and all(v > 0 for v in t.tau_values), "time.tau_values", "must be a non-empty list of values > 0")
    for (sec, key), choices in _CHOICES.items():
        val = getattr(getattr(cfg, sec), key)
        need(val in choices, f"{sec}.{key}", f"must be one of {', '.join(choices)} (got {val!r})")
    need(p.strike > 0, "payoff.strike", "must be > 0")
    need(p.spot > 0, "payoff.spot", "must be > 0")
    need(p.width > 0, "payoff.width", "must be > 0")
    need(s.n_points >= 2, "scan.n_points", "must be >= 2")
    need(s.d_min <= s.d_max, "scan.d_max", "must be >= scan.d_min")
    need(mc.s0 > 0, "mc.s0", "must be > 0")
    need(mc.n_paths >= 1, "mc.n_paths", "must be >= 1")
    need(mc.n_steps >= 1, "mc.n_steps", "must be >= 1")
    need(mc.bins >= 2, "mc.bins", "must be >= 2")
    need(qm.hbar > 0, "qm.hbar", "must be > 0")
    need(qm.m > 0, "qm.m", "must be > 0")
    need(qm.width > 0, "qm.width", "must be > 0")
    need(qm.t_max > 0, "qm.t_max", "must be > 0")
    need(qm.n_times >= 3, "qm.n_times", "must be >= 3")


def _build(data: dict, experiment: str | None) -> ScenarioConfig:
    problems: list[tuple[str, str]] = []
    data = dict(data)
    if experiment is not None:
        given = data.setdefault("experiment", experiment)
        if given != experiment:
            problems.append(("experiment", f"config says {given!r} but {experiment!r} was requested"))
    kind = data.get("experiment")
    if not isinstance(kind, str):
        raise ConfigError([("experiment", "missing or not a string")])

    top_known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    for key in data:
        if key not in top_known:
            problems.append((key, f"unknown key{_suggest(key, top_known | set(_SECTIONS))}"))

    overrides = EXPERIMENT_DEFAULTS.get(kind, {})
    sections = {}
    for name, cls in _SECTIONS.items():
        base = cls(**{**dataclasses.asdict(cls()), **overrides.get(name, {})})
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            problems.append((name, f"expected a table, got {type(raw).__name__}"))
            raw = {}
        sections[name] = _fill(cls, raw, name, base, problems)

    seed = _coerce(data.get("seed", 12345), "int", "seed", problems)
    out = _coerce(data.get("output_dir", "results"), "str", "output_dir", problems)
    seed = 12345 if seed is _BAD else seed
    out = "results" if out is _BAD else out
    cfg = ScenarioConfig(experiment=kind, seed=seed, output_dir=out, **sections)
    _constraints(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(source: str | Path, experiment: str | None = None) -> ScenarioConfig:
    """Parse a TOML scenario from a path or from TOML text.

    ``experiment`` supplies (or cross-checks) the ``experiment`` key, so a
    subcommand can run a config file that omits it.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith(".toml")):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([(str(path), f"cannot read: {exc.strerror}")]) from exc
    else:
        text = source
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([("<document>", f"malformed TOML: {exc}")]) from exc
    return _build(data, experiment)


def default_config(experiment: str, **top) -> ScenarioConfig:
    """Configuration with every default filled for ``experiment``."""
    return _build({"experiment": experiment, **top}, None)

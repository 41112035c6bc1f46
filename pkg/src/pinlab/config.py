"""Experiment configuration: INI parsing, validation and normalisation.

Sections and keys (all optional, defaults shown by ``pinlab validate``)::

    [law]        kind, alpha, L, L_c, L_gamma, L_offset, N_max, normalization, masses
    [grid]       beta, delta, h, N            (comma-separated lists)
    [batch]      master_seed, num_samples, pair_samples
    [run]        suite, out, workers
    [gates]      a1, a2, epsilon, delta0, beta0
    [tolerances] sigma, finite_size_C, residual
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .bounds import RegionConstants
from .errors import PinlabError
from .renewal import RenewalLaw, SlowlyVarying, build_power_law, build_srw_returns, from_masses

SUITES = ("asymptotics", "homogeneous", "quenched_grid", "bounds_grid", "replica_checks", "acceptance")
LAW_KINDS = ("power", "srw_d1", "srw_d3", "custom")


class ConfigError(PinlabError, ValueError):
    """Configuration problems; ``errors`` lists every one found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class LawSpec:
    kind: str = "power"
    alpha: float = 0.3
    L: str = "constant"
    L_c: float = 1.0
    L_gamma: float = 0.0
    L_offset: float = 2.0
    N_max: int = 2**16
    normalization: str = "truncate"
    masses: tuple[float, ...] = ()

    def build(self) -> RenewalLaw:
        if self.kind == "power":
            if self.L == "constant":
                L = SlowlyVarying.constant(self.L_c)
            else:
                L = SlowlyVarying.log_power(self.L_gamma, self.L_offset, self.L_c)
            return build_power_law(self.alpha, L, self.N_max, self.normalization)
        if self.kind == "srw_d1":
            return build_srw_returns("d1_recurrent", self.N_max)
        if self.kind == "srw_d3":
            return build_srw_returns("d3_transient", self.N_max)
        return from_masses(self.masses, name="custom")


@dataclass(frozen=True)
class GridSpec:
    beta: tuple[float, ...] = (0.1,)
    delta: tuple[float, ...] = (0.2,)
    h: tuple[float, ...] = ()
    N: tuple[int, ...] = (2**10,)


@dataclass(frozen=True)
class BatchSpec:
    master_seed: int = 20240601
    num_samples: int = 200
    pair_samples: int = 500


@dataclass(frozen=True)
class Tolerances:
    sigma: float = 3.0
    finite_size_C: float | None = None  # None: the homogeneous gap at the same N
    residual: float = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str
    law: LawSpec = field(default_factory=LawSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    batch: BatchSpec = field(default_factory=BatchSpec)
    gates: RegionConstants = field(default_factory=RegionConstants)
    tolerances: Tolerances = field(default_factory=Tolerances)
    out: str = "pinlab_out"
    workers: int = 1
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gates"] = asdict(self.gates)
        return d

    def resolved_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        # notes and output location do not change results
        d = self.to_dict()
        d.pop("out")
        d.pop("notes")
        d.pop("workers")
        blob = json.dumps(_jsonable(d), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


# key -> (type tag, default); type tags drive parsing
_SCHEMA: dict[str, dict[str, str]] = {
    "law": {
        "kind": "str", "alpha": "float", "L": "str", "L_c": "float", "L_gamma": "float",
        "L_offset": "float", "N_max": "int", "normalization": "str", "masses": "floats",
    },
    "grid": {"beta": "floats", "delta": "floats", "h": "floats", "N": "ints"},
    "batch": {"master_seed": "int", "num_samples": "int", "pair_samples": "int"},
    "run": {"suite": "str", "out": "str", "workers": "int"},
    "gates": {"a1": "float", "a2": "float", "epsilon": "float", "delta0": "float", "beta0": "float"},
    "tolerances": {"sigma": "float", "finite_size_C": "float_or_auto", "residual": "float"},
}


def _parse_int(text: str) -> int:
    text = text.strip()
    if "**" in text:
        base, exp = text.split("**", 1)
        return int(base) ** int(exp)
    v = float(text) if any(ch in text for ch in ".eE") else int(text)
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError(f"{text!r} is not an integer")
        v = int(v)
    return v


def _parse(tag: str, text: str):
    if tag == "str":
        return text.strip()
    if tag == "int":
        return _parse_int(text)
    if tag == "float":
        return float(text)
    if tag == "float_or_auto":
        return None if text.strip().lower() == "auto" else float(text)
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if tag == "floats":
        return tuple(float(t) for t in items)
    return tuple(_parse_int(t) for t in items)


def _read(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case (N, L_c, ...)
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError([f"line {exc.lineno}: key outside any section"]) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError([f"line {exc.lineno}: {exc.message if hasattr(exc, 'message') else exc}"]) from exc
    except configparser.ParsingError as exc:
        raise ConfigError([f"line {lineno}: cannot parse {line!r}" for lineno, line in exc.errors]) from exc
    return cp


def parse_config(text: str, source: str = "<config>", suite: str | None = None) -> ExperimentConfig:
    """Parse and validate INI text; every problem found is reported in one ``ConfigError``."""
    cp = _read(text, source)
    errors: list[str] = []
    values: dict[str, dict] = {s: {} for s in _SCHEMA}
    for section in cp.sections():
        if section not in _SCHEMA:
            errors.append(f"[{section}]: unknown section")
            continue
        for key, raw in cp.items(section):
            tag = _SCHEMA[section].get(key)
            if tag is None:
                errors.append(f"[{section}] {key}: unknown key")
                continue
            try:
                values[section][key] = _parse(tag, raw)
            except ValueError as exc:
                errors.append(f"[{section}] {key}: {exc}")
    run = values["run"]
    notes: list[str] = []
    chosen = suite or run.get("suite")
    if chosen is None:
        errors.append("[run] suite: missing (give it in the config or on the command line)")
    elif chosen not in SUITES:
        errors.append(f"[run] suite: unknown suite {chosen!r}; choose from {', '.join(SUITES)}")
    elif suite and run.get("suite") and run["suite"] != suite:
        notes.append(f"command-line suite {suite!r} overrides config suite {run['suite']!r}")

    law = LawSpec(**values["law"]) if not errors else None
    grid = GridSpec(**values["grid"]) if not errors else None
    batch = BatchSpec(**values["batch"]) if not errors else None
    tol = Tolerances(**values["tolerances"]) if not errors else None
    gates = RegionConstants(**values["gates"]) if not errors else None
    if errors:
        raise ConfigError(errors)

    errors += _semantic_errors(law, grid, batch, tol, gates, run)
    if law.kind == "power" and not 0 < law.alpha < 1 and chosen in ("quenched_grid", "bounds_grid", "replica_checks"):
        notes.append(
            f"alpha = {law.alpha}: the lower-bound region gates assume 0 < alpha < 1 and are "
            "marked not applicable; the upper-bound chain still applies"
        )
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        suite=chosen,
        law=law,
        grid=grid,
        batch=batch,
        gates=gates,
        tolerances=tol,
        out=run.get("out", "pinlab_out"),
        workers=run.get("workers", 1),
        notes=tuple(notes),
    )


def _finite(name: str, xs, errors: list[str]) -> None:
    for x in xs:
        if not math.isfinite(x):
            errors.append(f"{name}: non-finite value {x}")
            return


def _semantic_errors(law, grid, batch, tol, gates, run) -> list[str]:
    e: list[str] = []
    if law.kind not in LAW_KINDS:
        e.append(f"[law] kind: unknown kind {law.kind!r}; choose from {', '.join(LAW_KINDS)}")
    if not (math.isfinite(law.alpha) and law.alpha > 0):
        e.append("[law] alpha: must be a positive finite number")
    if law.L not in ("constant", "log_power"):
        e.append(f"[law] L: unknown slowly varying kind {law.L!r}")
    if not (math.isfinite(law.L_c) and law.L_c > 0):
        e.append("[law] L_c: must be positive")
    if law.L_offset < 2:
        e.append("[law] L_offset: must be >= 2")
    if law.N_max < 2:
        e.append("[law] N_max: must be >= 2")
    if law.normalization not in ("truncate", "exact_tail"):
        e.append(f"[law] normalization: unknown mode {law.normalization!r}")
    if law.kind == "custom":
        if not law.masses:
            e.append("[law] masses: required for kind = custom")
        elif any(m < 0 for m in law.masses) or abs(math.fsum(law.masses) - 1) > 1e-12:
            e.append("[law] masses: must be non-negative and sum to 1")
    _finite("[grid] beta", grid.beta, e)
    _finite("[grid] delta", grid.delta, e)
    _finite("[grid] h", grid.h, e)
    if any(b < 0 for b in grid.beta):
        e.append("[grid] beta: values must be >= 0")
    if any(n < 1 for n in grid.N):
        e.append("[grid] N: values must be >= 1")
    if batch.num_samples < 1:
        e.append("[batch] num_samples: must be >= 1")
    if batch.pair_samples < 2:
        e.append("[batch] pair_samples: must be >= 2")
    if batch.master_seed < 0:
        e.append("[batch] master_seed: must be >= 0")
    if run.get("workers", 1) < 1:
        e.append("[run] workers: must be >= 1")
    if not tol.sigma > 0:
        e.append("[tolerances] sigma: must be positive")
    if tol.finite_size_C is not None and not tol.finite_size_C >= 0:
        e.append("[tolerances] finite_size_C: must be >= 0")
    if not 0 <= gates.epsilon < 1:
        e.append("[gates] epsilon: must lie in [0, 1)")
    for k in ("a1", "a2", "delta0", "beta0"):
        if not getattr(gates, k) > 0:
            e.append(f"[gates] {k}: must be positive")
    return e


def validate_config(path: str | Path, suite: str | None = None) -> ExperimentConfig:
    """Read, validate and normalise a config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    return parse_config(text, str(path), suite)


def default_config(suite: str) -> ExperimentConfig:
    return parse_config("", "<defaults>", suite)


def render_config(cfg: ExperimentConfig) -> str:
    """INI text echoing every resolved value."""
    d = cfg.to_dict()
    sections = {
        "law": d["law"],
        "grid": d["grid"],
        "batch": d["batch"],
        "run": {"suite": cfg.suite, "out": cfg.out, "workers": cfg.workers},
        "gates": d["gates"],
        "tolerances": d["tolerances"],
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        for k, v in items.items():
            if isinstance(v, (list, tuple)):
                v = ", ".join(repr(x) for x in v)
            elif v is None:
                v = "auto"
            lines.append(f"{k} = {v}")
        lines.append("")
    for note in cfg.notes:
        lines.append(f"# note: {note}")
    return "\n".join(lines).rstrip() + "\n"

"""Experiment configuration: INI-style ``key = value`` sections.

Schema version 1::

    [experiment]
    schema = 1
    kind = linear-analysis      ; simulate | monotone-test | reduction | equivalence | linear-analysis

    [problem]
    preset = heat               ; see ``parabiss presets``
    a = 0.0                     ; preset parameters (a | r | b)
    domain = 1.0                ; interval length, or "Lx, Ly"
    n = 51                      ; nodes per axis, or "nx, ny"
    dt = 0.01
    T = 1.0
    p = inf                     ; norm exponent, >= 1 or inf

    [input]                     ; simulate only
    signal = sinusoid           ; constant | sinusoid | piecewise-constant | tabulated
    amplitude = 0.5
    omega = 6.28
    initial_amplitude = 1.0

    [battery]                   ; monotone-test, reduction
    size = 100
    seed = 7
    data_min = 0.0
    data_max = 1.0

    [sweep]                     ; reduction, equivalence, linear-analysis
    constants = 0.5, 1, 2
    T = 50
    a_values = -5, 0, 5

Unknown sections or keys are rejected, as are values outside their range.
Errors carry the offending field and its line number.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .presets import PRESETS

SCHEMA_VERSION = 1
KINDS = ("simulate", "monotone-test", "reduction", "equivalence", "linear-analysis")
SIGNALS = ("constant", "sinusoid", "piecewise-constant", "tabulated")
U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None, path: str | None = None):
        self.field = field
        self.line = line
        where = f"{path or '<config>'}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {field + ': ' if field else ''}{message}")


@dataclass
class ExperimentConfig:
    kind: str
    preset: str = "heat"
    params: dict = field(default_factory=dict)
    domain: tuple[float, ...] = (1.0,)
    n: tuple[int, ...] = (51,)
    dt: float = 0.01
    T: float = 1.0
    p: float = math.inf
    signal: dict = field(default_factory=lambda: {"kind": "constant", "value": 0.0})
    initial_amplitude: float = 1.0
    battery_size: int = 20
    seed: int = 0
    data_range: tuple[float, float] = (0.0, 1.0)
    constants: tuple[float, ...] = (0.5, 1.0, 2.0)
    sweep_T: float = 50.0
    a_values: tuple[float, ...] | None = None
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = "inf" if math.isinf(self.p) else self.p
        return d


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _floats(s: str) -> tuple[float, ...]:
    vals = tuple(float(x) for x in re.split(r"[,\s]+", s.strip()) if x)
    if not vals:
        raise ValueError("empty list")
    return vals


def _ints(s: str) -> tuple[int, ...]:
    vals = tuple(int(x) for x in re.split(r"[,\s]+", s.strip()) if x)
    if not vals:
        raise ValueError("empty list")
    return vals


def _p(s: str) -> float:
    return math.inf if s.strip().lower() in ("inf", "infinity") else float(s)


def _choice(options):
    def parse(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


# section -> key -> (parser, validator or None, message)
SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "schema": (int, lambda v: v == SCHEMA_VERSION, f"unsupported schema version (expected {SCHEMA_VERSION})"),
        "kind": (_choice(KINDS), None, ""),
        "title": (str, None, ""),
    },
    "problem": {
        "preset": (_choice(tuple(sorted(PRESETS))), None, ""),
        "a": (float, None, ""),
        "r": (float, None, ""),
        "b": (float, None, ""),
        "domain": (_floats, lambda v: len(v) in (1, 2) and all(x > 0 for x in v), "need 1 or 2 positive lengths"),
        "n": (_ints, lambda v: len(v) in (1, 2) and all(x >= 3 for x in v), "need 1 or 2 node counts >= 3"),
        "dt": (float, _pos, "must be positive"),
        "t": (float, _pos, "must be positive"),
        "p": (_p, lambda v: v >= 1, "must be >= 1 or inf"),
    },
    "input": {
        "signal": (_choice(SIGNALS), None, ""),
        "value": (float, None, ""),
        "amplitude": (float, _nonneg, "must be nonnegative"),
        "omega": (float, None, ""),
        "phase": (float, None, ""),
        "offset": (float, None, ""),
        "breaks": (_floats, lambda v: all(b > 0 for b in v), "breaks must be positive"),
        "values": (_floats, None, ""),
        "times": (_floats, None, ""),
        "initial_amplitude": (float, None, ""),
    },
    "battery": {
        "size": (int, _pos, "must be positive"),
        "seed": (int, lambda v: 0 <= v <= U64_MAX, "must be an unsigned 64-bit integer"),
        "data_min": (float, None, ""),
        "data_max": (float, None, ""),
    },
    "sweep": {
        "constants": (_floats, None, ""),
        "t": (float, _pos, "must be positive"),
        "a_values": (_floats, None, ""),
    },
}

REQUIRED = {("experiment", "schema"), ("experiment", "kind")}


def _line_index(text: str) -> dict[tuple[str | None, str | None], int]:
    """Line numbers of section headers ``(sec, None)`` and keys ``(sec, key)``."""
    out: dict = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), i)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m:
            out.setdefault((section, m.group(1).strip().lower()), i)
    return out


def parse_config(text: str, path: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.DuplicateOptionError as e:
        raise ConfigError("duplicate key", f"{e.section}.{e.option}", e.lineno, path) from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}", line=getattr(e, "lineno", None), path=path) from None
    lines = _line_index(text)

    def err(msg, sec, key=None):
        return ConfigError(msg, f"{sec}.{key}" if key else f"[{sec}]", lines.get((sec, key)), path)

    values: dict[tuple[str, str], object] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise err(f"unknown section (allowed: {', '.join(SCHEMA)})", sec)
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise err(f"unknown key (allowed: {', '.join(SCHEMA[sec])})", sec, key)
            parse, check, msg = SCHEMA[sec][key]
            try:
                v = parse(raw)
            except ValueError as e:
                raise err(f"cannot parse {raw!r}: {e}", sec, key) from None
            if isinstance(v, float) and not math.isfinite(v) and key != "p":
                raise err("must be finite", sec, key)
            if check is not None and not check(v):
                raise err(f"{msg} (got {raw!r})", sec, key)
            values[(sec, key)] = v
    for sec, key in REQUIRED:
        if (sec, key) not in values:
            raise ConfigError("required field missing", f"{sec}.{key}", lines.get((sec, None)), path)

    def get(sec, key, default=None):
        return values.get((sec, key), default)

    cfg = ExperimentConfig(kind=get("experiment", "kind"))
    cfg.preset = get("problem", "preset", "heat")
    cfg.params = {k: get("problem", k) for k in ("a", "r", "b") if ("problem", k) in values}
    bad = set(cfg.params) - set(PRESETS[cfg.preset].defaults)
    if bad:
        k = sorted(bad)[0]
        raise err(f"not a parameter of preset {cfg.preset!r}", "problem", k)
    cfg.domain = get("problem", "domain", cfg.domain)
    cfg.n = get("problem", "n", cfg.n)
    if len(cfg.n) not in (1, len(cfg.domain)):
        raise err("node counts do not match the domain dimension", "problem", "n")
    cfg.dt = get("problem", "dt", cfg.dt)
    cfg.T = get("problem", "t", cfg.T)
    cfg.p = get("problem", "p", cfg.p)

    sig = get("input", "signal", "constant")
    if sig == "constant":
        cfg.signal = {"kind": sig, "value": get("input", "value", 0.0)}
    elif sig == "sinusoid":
        cfg.signal = {"kind": sig, "amplitude": get("input", "amplitude", 1.0), "omega": get("input", "omega", 1.0),
                      "phase": get("input", "phase", 0.0), "offset": get("input", "offset", 0.0)}
    elif sig == "piecewise-constant":
        breaks, vals = get("input", "breaks"), get("input", "values")
        if breaks is None or vals is None or len(vals) != len(breaks) + 1:
            raise err("piecewise-constant needs breaks and len(breaks)+1 values", "input", "values")
        if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise err("breaks must increase", "input", "breaks")
        cfg.signal = {"kind": sig, "breaks": list(breaks), "values": list(vals)}
    else:
        times, vals = get("input", "times"), get("input", "values")
        if times is None or vals is None or len(times) != len(vals) or len(times) < 2:
            raise err("tabulated needs times and values of equal length >= 2", "input", "values")
        if times[0] != 0 or any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise err("times must start at 0 and increase", "input", "times")
        cfg.signal = {"kind": sig, "times": list(times), "traces": list(vals)}
    cfg.initial_amplitude = get("input", "initial_amplitude", cfg.initial_amplitude)

    cfg.battery_size = get("battery", "size", 100 if cfg.kind == "monotone-test" else cfg.battery_size)
    cfg.seed = get("battery", "seed", cfg.seed)
    cfg.data_range = (get("battery", "data_min", 0.0), get("battery", "data_max", 1.0))
    if not cfg.data_range[0] < cfg.data_range[1]:
        raise err("data_max must exceed data_min", "battery", "data_max")
    cfg.constants = get("sweep", "constants", cfg.constants)
    cfg.sweep_T = get("sweep", "t", cfg.sweep_T)
    cfg.a_values = get("sweep", "a_values")
    if cfg.kind == "linear-analysis":
        if cfg.preset != "heat":
            raise err("linear-analysis needs the heat preset", "problem", "preset")
        if len(cfg.domain) != 1:
            raise err("linear-analysis runs on an interval", "problem", "domain")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path=str(path)) from None
    return parse_config(text, str(path))

"""Config file parsing for the pipeline.

The format is a small INI subset: sections ``[initial]``, ``[run]``,
``[field]``, ``[diagnostics]``; ``key = value`` lines; blank lines and
``#`` comments ignored.  Unknown sections or keys are hard errors with line
numbers, and every range violation names the offending key.  Values left
out fall back to documented defaults, and the fully resolved configuration
(defaults included) is echoed so a manifest can record it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

from .asymptotics import DEFAULT_SAMPLES, DEFAULT_WINDOW
from .dynamics import RunConfig, SERIES_COLUMNS
from .field import FieldConfig
from .initial_data import PRESETS, InitialDataSpec


class ConfigError(ValueError):
    """Raised for malformed config text, unknown keys, or bad ranges."""


@dataclass(frozen=True)
class DiagnosticsPlan:
    """What to measure after a run: moment order, fit window, probes."""

    ell: int = 1
    window: tuple[float, float] = DEFAULT_WINDOW
    times: tuple[float, float] = DEFAULT_WINDOW
    n_samples: int = DEFAULT_SAMPLES
    column: str = "sup_E"
    scatter_mode: str = "linear"
    source: str = "simulate"
    moment_resolution: int = 33
    density_resolution: int = 48

    def __post_init__(self):
        if not 0 <= self.ell <= 3:
            raise ValueError(f"ell must lie in 0..3, got {self.ell}")
        lo, hi = self.window
        if lo < 1.0 or hi <= lo:
            raise ValueError(f"window must satisfy 1 <= lo < hi, got {lo}:{hi}")
        tlo, thi = self.times
        if tlo <= 0 or thi <= tlo:
            raise ValueError(f"times must satisfy 0 < lo < hi, got {tlo}..{thi}")
        if self.n_samples < 5:
            raise ValueError(f"n_samples must be >= 5, got {self.n_samples}")
        if self.column not in SERIES_COLUMNS or self.column == "t":
            raise ValueError(f"column must be a series column, got {self.column!r}")
        if self.scatter_mode not in ("linear", "modified"):
            raise ValueError(f"scatter_mode must be linear or modified, "
                             f"got {self.scatter_mode!r}")
        if self.source not in ("simulate", "free-stream"):
            raise ValueError(f"source must be simulate or free-stream, "
                             f"got {self.source!r}")


@dataclass(frozen=True)
class ConfigBundle:
    """Parsed configs plus the resolved-value echo for the manifest."""

    initial: InitialDataSpec
    run: RunConfig
    field: FieldConfig
    plan: DiagnosticsPlan
    resolved: dict

    def __iter__(self):
        return iter((self.initial, self.run, self.field, self.plan))


def _int(s: str) -> int:
    return int(s, 10)


def _float(s: str) -> float:
    return float(s)


def _floats(s: str) -> tuple[float, ...]:
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _triple(s: str) -> tuple[float, float, float]:
    vals = _floats(s)
    if len(vals) != 3:
        raise ValueError(f"expected 3 components, got {len(vals)}")
    return vals


def _window(s: str) -> tuple[float, float]:
    parts = s.split(":")
    if len(parts) != 2:
        raise ValueError("expected lo:hi")
    return float(parts[0]), float(parts[1])


def _time_range(s: str) -> tuple[float, float]:
    parts = s.split("..")
    if len(parts) != 2:
        raise ValueError("expected t0..t1")
    return float(parts[0]), float(parts[1])


@dataclass(frozen=True)
class _Key:
    convert: Callable
    constraint: str = ""
    check: Callable | None = None


_POSITIVE = "a value > 0"

_INITIAL_KEYS = {
    "preset": _Key(str, f"one of {', '.join(PRESETS)}", lambda v: v in PRESETS),
    "m": _Key(_int, "m >= 0 and m <= 8", lambda v: 0 <= v <= 8),
    "p_geg": _Key(_float, "p_geg > m + 2", lambda v: v > 2.0),
    "support_scale": _Key(_float, _POSITIVE, lambda v: v > 0),
    "offset": _Key(_float, "offset in [0, 0.5)", lambda v: 0 <= v < 0.5),
    "nx": _Key(_int, "nx >= 8", lambda v: v >= 8),
    "nv": _Key(_int, "nv >= 8", lambda v: v >= 8),
    "mean_plus": _Key(_triple),
    "mean_minus": _Key(_triple),
    "sigma_plus": _Key(_float, _POSITIVE, lambda v: v > 0),
    "sigma_minus": _Key(_float, _POSITIVE, lambda v: v > 0),
    "cutoff": _Key(_float, _POSITIVE, lambda v: v > 0),
    "charge": _Key(_float, _POSITIVE, lambda v: v > 0),
    "mass": _Key(_float, _POSITIVE, lambda v: v > 0),
}

_RUN_KEYS = {
    "t_start": _Key(_float, "t_start >= 0", lambda v: v >= 0),
    "t_end": _Key(_float, "t_end > 1", lambda v: v > 1.0),
    "dt0": _Key(_float, _POSITIVE, lambda v: v > 0),
    "eta": _Key(_float, "eta in (0, 0.2]", lambda v: 0 < v <= 0.2),
    "dt_max": _Key(_float, _POSITIVE, lambda v: v > 0),
    "output_times": _Key(_floats),
    "snapshot_times": _Key(_floats),
    "probe_resolution": _Key(_int, "probe_resolution >= 3", lambda v: v >= 3),
    "probe_inflate": _Key(_float, "probe_inflate >= 1", lambda v: v >= 1.0),
    "probe_eps_scale": _Key(_float, "probe_eps_scale >= 0", lambda v: v >= 0),
    "field_eps_rate": _Key(_float, "field_eps_rate >= 0", lambda v: v >= 0),
    "seed": _Key(_int),
}

_FIELD_KEYS = {
    "method": _Key(str, "one of direct, tree", lambda v: v in ("direct", "tree")),
    "eps": _Key(_float, "eps >= 0", lambda v: v >= 0),
    "theta": _Key(_float, "theta in (0, 1]", lambda v: 0 < v <= 1.0),
    "leaf_size": _Key(_int, "leaf_size >= 1", lambda v: v >= 1),
    "direct_threshold": _Key(_int, "direct_threshold >= 0", lambda v: v >= 0),
}

_DIAG_KEYS = {
    "ell": _Key(_int, "ell in 0..3", lambda v: 0 <= v <= 3),
    "window": _Key(_window, "1 <= lo < hi", lambda v: v[0] >= 1 and v[1] > v[0]),
    "times": _Key(_time_range, "0 < t0 < t1", lambda v: 0 < v[0] < v[1]),
    "n_samples": _Key(_int, "n_samples >= 5", lambda v: v >= 5),
    "column": _Key(str, "a series column other than t",
                   lambda v: v in SERIES_COLUMNS and v != "t"),
    "scatter_mode": _Key(str, "one of linear, modified",
                         lambda v: v in ("linear", "modified")),
    "source": _Key(str, "one of simulate, free-stream",
                   lambda v: v in ("simulate", "free-stream")),
    "moment_resolution": _Key(_int, "moment_resolution >= 5", lambda v: v >= 5),
    "density_resolution": _Key(_int, "density_resolution >= 5", lambda v: v >= 5),
}

_SECTIONS = {
    "initial": _INITIAL_KEYS,
    "run": _RUN_KEYS,
    "field": _FIELD_KEYS,
    "diagnostics": _DIAG_KEYS,
}

# Config-level defaults for RunConfig fields without dataclass defaults.
_RUN_FALLBACK = {"t_end": 160.0}


def _parse_lines(text: str) -> tuple[dict, dict]:
    """Split config text into {section: {key: raw}} plus line numbers."""
    values: dict = {name: {} for name in _SECTIONS}
    lines: dict = {name: {} for name in _SECTIONS}
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"line {ln}: unknown section [{name}]; "
                                  f"expected one of {sorted(_SECTIONS)}")
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value, got {line!r}")
        if section is None:
            raise ConfigError(f"line {ln}: key before any [section] header")
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in _SECTIONS[section]:
            raise ConfigError(f"line {ln}: unknown key {key} in [{section}]")
        if key in values[section]:
            first = lines[section][key]
            raise ConfigError(f"line {ln}: duplicate key {key} in [{section}] "
                              f"(first set on line {first})")
        values[section][key] = val
        lines[section][key] = ln
    return values, lines


def _convert_section(section: str, raw: dict, lines: dict) -> dict:
    spec = _SECTIONS[section]
    out = {}
    for key, text in raw.items():
        ln = lines[key]
        entry = spec[key]
        try:
            value = entry.convert(text)
        except ValueError as exc:
            raise ConfigError(f"line {ln}: key {key}: "
                              f"could not parse {text!r} ({exc})") from None
        if entry.check is not None and not entry.check(value):
            raise ConfigError(f"line {ln}: key {key}: must satisfy "
                              f"{entry.constraint}, got {text}")
        out[key] = value
    return out


def _build(section: str, cls, kwargs: dict):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def parse_config(text: str) -> ConfigBundle:
    """Parse config text into fully resolved objects plus a value echo.

    Unpacks as ``initial, run, field, plan = parse_config(text)``; the
    ``resolved`` attribute carries every parameter (defaults included) in
    plain dict form for the run manifest.
    """
    raw, lines = _parse_lines(text)
    vals = {name: _convert_section(name, raw[name], lines[name])
            for name in _SECTIONS}

    init_kw = vals["initial"]
    if "p_geg" in init_kw:
        m = init_kw.get("m", InitialDataSpec.m)
        if init_kw["p_geg"] <= m + 2:
            ln = lines["initial"]["p_geg"]
            raise ConfigError(f"line {ln}: key p_geg: must satisfy "
                              f"p_geg > m + 2 = {m + 2}, got {init_kw['p_geg']}")
    initial = _build("initial", InitialDataSpec, init_kw)

    field = _build("field", FieldConfig, vals["field"])

    run_kw = dict(_RUN_FALLBACK)
    run_kw.update(vals["run"])
    run_kw["field"] = field
    rc = _build("run", RunConfig, run_kw)

    plan = _build("diagnostics", DiagnosticsPlan, vals["diagnostics"])

    init_echo = dataclasses.asdict(initial)
    if init_echo["p_geg"] is None:
        init_echo["p_geg"] = float(initial.m + 3)
    resolved = {
        "initial": _plain(init_echo),
        "run": _plain({**dataclasses.asdict(rc), "field": None,
                       "output_times": list(rc.resolved_output_times())}),
        "field": _plain(dataclasses.asdict(field)),
        "diagnostics": _plain(dataclasses.asdict(plan)),
        "defaulted_keys": {
            name: sorted(set(_SECTIONS[name]) - set(raw[name]))
            for name in _SECTIONS
        },
    }
    resolved["run"].pop("field")
    return ConfigBundle(initial, rc, field, plan, resolved)


def _plain(obj):
    """Convert tuples to lists recursively so the echo is JSON-friendly."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj

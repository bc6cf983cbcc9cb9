"""Sectioned ``key = value`` run configuration.

Grammar (one item per line, ``#`` starts a comment)::

    [shape]
    kind = ellipsoid            # cuboid | ellipsoid
    aspect = 2, 1, 1
    resolution = 8              # or three integers

    [params]
    eta = 0.1                   # required
    alpha = 1.0
    lambda = 0.0
    period = 1.0

    [field]
    kind = uniform_rotating     # uniform_rotating | uniform_oscillating
    u = 0, 1, 0
    v = 0, 0, 1
    amplitude = 1.0

    [tolerances]
    minimize = 1e-8
    shoot = 1e-8
    clearance = 1e-8
    gap = 1e-3
    dt = 0                      # 0 selects the default step

    [run]
    seed = 0
    threads = 1
    output_dir = out

``[shape] kind``, ``[shape] resolution`` and ``[params] eta`` are required.
The applied-field period is always the ``[params]`` period.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass, field

from .energy import ConfigError, ExternalFieldSpec, SimParams
from .grid import ShapeError, ShapeSpec

__all__ = ["ConfigErrors", "Tolerances", "RunConfig", "parse_config", "serialize_config", "config_hash"]

THREADS_ENV = "LLGORBIT_THREADS"


class ConfigErrors(ConfigError):
    """All problems found in a configuration, each tagged with a line number."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__("\n".join(f"line {ln}: {msg}" if ln else msg for ln, msg in errors))


@dataclass(frozen=True)
class Tolerances:
    minimize: float = 1e-8
    shoot: float = 1e-8
    clearance: float = 1e-8
    gap: float = 1e-3
    dt: float = 0.0


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RunConfig:
    shape: ShapeSpec
    resolution: tuple[int, int, int]
    params: SimParams
    tolerances: Tolerances = Tolerances()
    seed: int = 0
    threads: int = field(default_factory=_default_threads)
    output_dir: str = "out"


def _vec(text, n=3):
    parts = [s for s in re.split(r"[,\s]+", text.strip()) if s]
    if len(parts) != n:
        raise ValueError(f"expected {n} numbers, got {text!r}")
    return tuple(float(s) for s in parts)


def _resolution(text):
    parts = [s for s in re.split(r"[,\s]+", text.strip()) if s]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError(f"resolution needs 1 or 3 integers, got {text!r}")
    return tuple(int(s) for s in parts)


def _uint(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be a non-negative integer")
    return v


# section -> key -> converter
SCHEMA = {
    "shape": {"kind": str, "aspect": _vec, "resolution": _resolution},
    "params": {"eta": float, "alpha": float, "lambda": float, "period": float},
    "field": {"kind": str, "u": _vec, "v": _vec, "amplitude": float},
    "tolerances": {k: float for k in ("minimize", "shoot", "clearance", "gap", "dt")},
    "run": {"seed": _uint, "threads": int, "output_dir": str},
}
REQUIRED = [("shape", "kind"), ("shape", "resolution"), ("params", "eta")]


def parse_config(text: str) -> RunConfig:
    errors: list[tuple[int, str]] = []
    values: dict[tuple[str, str], object] = {}
    seen: dict[tuple[str, str], int] = {}
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append((ln, f"malformed section header {line!r}"))
                section = None
                continue
            section = line[1:-1].strip()
            if section not in SCHEMA:
                errors.append((ln, f"unknown section [{section}]"))
                section = None
            continue
        if "=" not in line:
            errors.append((ln, f"expected 'key = value', got {line!r}"))
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if section is None:
            errors.append((ln, f"key {key!r} outside a known section"))
            continue
        if key not in SCHEMA[section]:
            errors.append((ln, f"unknown key {key!r} in [{section}]"))
            continue
        if (section, key) in seen:
            errors.append(
                (ln, f"duplicate key {section}.{key} (lines {seen[section, key]} and {ln})")
            )
            continue
        seen[section, key] = ln
        try:
            values[section, key] = SCHEMA[section][key](val)
        except ValueError as exc:
            errors.append((ln, f"{section}.{key}: type mismatch ({exc})"))

    for sec, key in REQUIRED:
        if (sec, key) not in seen:
            errors.append((0, f"missing required key {sec}.{key}"))

    def get(sec, key, default):
        return values.get((sec, key), default)

    def check(sec, key, ok, what):
        if (sec, key) in values and not ok(values[sec, key]):
            errors.append((seen[sec, key], f"{sec}.{key} = {values[sec, key]!r}: {what}"))

    check("params", "eta", lambda v: v > 0, "must be positive")
    check("params", "period", lambda v: v > 0, "must be positive")
    check("run", "threads", lambda v: v >= 1, "must be a positive integer")
    check("shape", "resolution", lambda v: min(v) >= 2, "must be >= 2 along each axis")
    for key in ("minimize", "shoot", "clearance", "gap"):
        check("tolerances", key, lambda v: v > 0, "tolerances must be strictly positive")
    check("tolerances", "dt", lambda v: v >= 0, "must be non-negative (0 = default)")
    if errors:
        raise ConfigErrors(errors)

    period = get("params", "period", 1.0)
    try:
        shape = ShapeSpec(get("shape", "kind", ""), get("shape", "aspect", (1.0, 1.0, 1.0)))
    except ShapeError as exc:
        errors.append((seen.get(("shape", "kind"), 0), str(exc)))
    try:
        fs = ExternalFieldSpec(
            get("field", "kind", "uniform_rotating"),
            get("field", "u", (0.0, 1.0, 0.0)),
            get("field", "v", (0.0, 0.0, 1.0)),
            period,
            get("field", "amplitude", 1.0),
        )
    except ConfigError as exc:
        errors.append((seen.get(("field", "kind"), 0), str(exc)))
    if errors:
        raise ConfigErrors(errors)

    params = SimParams(
        eta=get("params", "eta", 0.1),
        alpha=get("params", "alpha", 0.0),
        lam=get("params", "lambda", 0.0),
        period=period,
        field_spec=fs,
    )
    tol = Tolerances(**{k: v for (s, k), v in values.items() if s == "tolerances"})
    return RunConfig(
        shape=shape,
        resolution=get("shape", "resolution", (8, 8, 8)),
        params=params,
        tolerances=tol,
        seed=get("run", "seed", 0),
        threads=get("run", "threads", _default_threads()),
        output_dir=get("run", "output_dir", "out"),
    )


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def serialize_config(c: RunConfig) -> str:
    p, f, t = c.params, c.params.field_spec, c.tolerances
    sections = {
        "shape": {"kind": c.shape.kind, "aspect": c.shape.aspect, "resolution": c.resolution},
        "params": {"eta": p.eta, "alpha": p.alpha, "lambda": p.lam, "period": p.period},
        "field": {"kind": f.kind, "u": f.u, "v": f.v, "amplitude": f.amplitude},
        "tolerances": t.__dict__,
        "run": {"seed": c.seed, "threads": c.threads, "output_dir": c.output_dir},
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {_fmt(v)}" for k, v in items.items()]
        lines.append("")
    return "\n".join(lines)


def config_hash(c: RunConfig) -> str:
    return hashlib.sha256(serialize_config(c).encode()).hexdigest()

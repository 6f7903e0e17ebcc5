"""Run configuration: flat ``key = value`` lines grouped under ``[section]`` headers.

Example::

    [grid]
    dim = 2
    n = 128

    [kernel]
    family = power
    alpha = 0.0
    delta = 0.5

Every key has a default except that ``model.epsilon`` and
``model.epsilon_over_h`` are mutually exclusive (the latter defaults to 10).
``write_config`` emits a canonical form that parses back to an equal object.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, get_type_hints

__all__ = [
    "ConfigError",
    "GridCfg",
    "KernelCfg",
    "ModelCfg",
    "TimeCfg",
    "InitCfg",
    "OutputCfg",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "write_config",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridCfg:
    dim: int = 2
    n: int = 512


@dataclass(frozen=True)
class KernelCfg:
    family: str = "power"
    alpha: float = 0.0
    delta: float = 0.5


@dataclass(frozen=True)
class ModelCfg:
    epsilon: float | None = None
    epsilon_over_h: float | None = None
    gamma: float = 0.0
    omega: float = 0.1
    m_penalty: float = 1000.0
    a_h: float = 0.0
    b_h: float = 0.0
    potential_cut: tuple[float, float] = (-0.5, 1.5)
    potential: str = "double_well"
    penalty_scheme: str = "implicit"


@dataclass(frozen=True)
class TimeCfg:
    tau: float = 1e-3
    t_max: float = 100.0
    stop_tol: float = 1e-5
    bootstrap: str = "euler"


@dataclass(frozen=True)
class InitCfg:
    kind: str = "coarse_random"
    seed: int = 0
    ratio: int = 16
    path: str = ""


@dataclass(frozen=True)
class OutputCfg:
    dir: str = "out"
    snapshot_times: tuple[float, ...] | None = None  # None: geometric default
    thin: int = 1


_SECTIONS = {
    "grid": GridCfg,
    "kernel": KernelCfg,
    "model": ModelCfg,
    "time": TimeCfg,
    "init": InitCfg,
    "output": OutputCfg,
}

_CHOICES = {
    ("kernel", "family"): ("power", "gaussian"),
    ("model", "potential"): ("double_well", "none"),
    ("model", "penalty_scheme"): ("implicit", "explicit"),
    ("time", "bootstrap"): ("copy", "euler"),
    ("init", "kind"): ("disk", "sine", "coarse_random", "file"),
}


@dataclass(frozen=True)
class RunConfig:
    grid: GridCfg = field(default_factory=GridCfg)
    kernel: KernelCfg = field(default_factory=KernelCfg)
    model: ModelCfg = field(default_factory=lambda: ModelCfg(epsilon_over_h=10.0))
    time: TimeCfg = field(default_factory=TimeCfg)
    init: InitCfg = field(default_factory=InitCfg)
    output: OutputCfg = field(default_factory=OutputCfg)

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.grid.n

    @property
    def epsilon(self) -> float:
        """Interface width; ``epsilon_over_h`` follows the grid if N is overridden."""
        m = self.model
        return m.epsilon if m.epsilon is not None else m.epsilon_over_h * self.h

    def override(self, n: int | None = None, seed: int | None = None, out: str | None = None) -> "RunConfig":
        cfg = self
        if n is not None:
            cfg = replace(cfg, grid=replace(cfg.grid, n=n))
        if seed is not None:
            cfg = replace(cfg, init=replace(cfg.init, seed=seed))
        if out is not None:
            cfg = replace(cfg, output=replace(cfg.output, dir=out))
        _validate(cfg)
        return cfg

    def with_axis(self, axis: str, value: float) -> "RunConfig":
        """Copy with one sweep parameter replaced."""
        if axis == "gamma":
            return replace(self, model=replace(self.model, gamma=value))
        if axis in ("alpha", "delta"):
            return replace(self, kernel=replace(self.kernel, **{axis: value}))
        raise ValueError(f"unknown sweep axis {axis!r}")


def _convert(raw: str, typ: Any, where: str):
    raw = raw.strip()
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    if typ is str:
        return raw
    if typ == float | None:
        return float(raw)
    if typ == tuple[float, float]:
        parts = [float(x) for x in raw.split(",")]
        if len(parts) != 2:
            raise ValueError("expected two comma-separated numbers")
        return tuple(parts)
    if typ == tuple[float, ...] | None:
        if raw.lower() == "auto":
            return None
        return tuple(float(x) for x in raw.split(",") if x.strip())
    raise TypeError(f"no converter for {where}")  # pragma: no cover


def _type_name(typ) -> str:
    return getattr(typ, "__name__", None) or str(typ).replace("typing.", "")


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif "=" in s and section is not None:
            where.setdefault((section, s.split("=", 1)[0].strip()), i)
    return where


def parse_config_text(text: str, base_dir: str = ".") -> RunConfig:
    cp = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    lines = _line_numbers(text)
    sections = {}
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
    for name, cls in _SECTIONS.items():
        types = get_type_hints(cls)
        kw = {}
        if cp.has_section(name):
            for key, raw in cp.items(name):
                where = f"{name}.{key}"
                if key not in types:
                    raise ConfigError(f"unknown key {where!r} (line {lines.get((name, key), '?')})")
                typ = types[key]
                try:
                    kw[key] = _convert(raw, typ, where)
                except ValueError as exc:
                    raise ConfigError(
                        f"line {lines.get((name, key), '?')}: {where} expects "
                        f"{_type_name(typ)}, got {raw.strip()!r} ({exc})"
                    ) from None
                choices = _CHOICES.get((name, key))
                if choices and kw[key] not in choices:
                    raise ConfigError(
                        f"line {lines.get((name, key), '?')}: {where} must be one of {choices}, "
                        f"got {kw[key]!r}"
                    )
        sections[name] = kw
    model = sections["model"]
    if "epsilon" in model and "epsilon_over_h" in model:
        raise ConfigError("model.epsilon and model.epsilon_over_h are mutually exclusive")
    if "epsilon" not in model and "epsilon_over_h" not in model:
        model["epsilon_over_h"] = 10.0
    init = sections["init"]
    if init.get("kind") == "file" and init.get("path"):
        if not os.path.isabs(init["path"]):
            init["path"] = os.path.normpath(os.path.join(base_dir, init["path"]))
    cfg = RunConfig(**{name: _SECTIONS[name](**kw) for name, kw in sections.items()})
    _validate(cfg)
    return cfg


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, os.path.dirname(os.path.abspath(path)))


def _validate(cfg: RunConfig) -> None:
    g, k, m, t, i, o = cfg.grid, cfg.kernel, cfg.model, cfg.time, cfg.init, cfg.output
    if g.dim not in (1, 2, 3):
        raise ConfigError(f"grid.dim must be 1, 2 or 3, got {g.dim}")
    if g.n <= 0 or g.n % 2:
        raise ConfigError(f"grid.n must be a positive even integer, got {g.n}")
    if not k.delta > 0:
        raise ConfigError("kernel.delta must be positive")
    if k.family == "power" and not k.alpha < g.dim + 2:
        raise ConfigError(f"kernel.alpha must be below d + 2 = {g.dim + 2}")
    if m.epsilon is not None and m.epsilon_over_h is not None:
        raise ConfigError("model.epsilon and model.epsilon_over_h are mutually exclusive")
    if not cfg.epsilon > 0:
        raise ConfigError("epsilon must be positive")
    if not 0.0 < m.omega < 1.0:
        raise ConfigError("model.omega must lie in (0, 1)")
    for name in ("gamma", "m_penalty", "a_h", "b_h"):
        if getattr(m, name) < 0:
            raise ConfigError(f"model.{name} must be nonnegative")
    if not (t.tau > 0 and t.t_max > 0 and t.stop_tol > 0):
        raise ConfigError("time.tau, time.t_max and time.stop_tol must be positive")
    if i.ratio < 1:
        raise ConfigError("init.ratio must be at least 1")
    if i.kind == "coarse_random" and g.n % i.ratio:
        raise ConfigError(f"grid.n={g.n} is not a multiple of init.ratio={i.ratio}")
    if i.kind == "file":
        if not i.path:
            raise ConfigError("init.kind = file requires init.path")
        if not os.path.isfile(i.path):
            raise ConfigError(f"init.path does not exist: {i.path}")
    if o.thin < 1:
        raise ConfigError("output.thin must be at least 1")


def _fmt(v) -> str:
    if isinstance(v, bool):  # pragma: no cover - no boolean keys yet
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def write_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config_text(write_config(c)) == c``."""
    out = []
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in fields(sec):
            v = getattr(sec, f.name)
            if v is None:
                if (name, f.name) == ("output", "snapshot_times"):
                    out.append(f"{f.name} = auto")
                continue
            if name == "init" and f.name == "path" and not v:
                continue
            out.append(f"{f.name} = {_fmt(v)}")
        out.append("")
    return "\n".join(out)

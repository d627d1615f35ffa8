"""Run configuration: ``[section]`` headers with ``key = value`` lines.

Grammar (all sections optional, unknown sections or keys are errors)::

    [run]       seed = 0
    [grid]      n = 128; lo = -1; hi = 1; mask = square|disk|annulus;
                radius = 1; inner = 0.2; periodic = false
    [scenario]  name = vortex; center = 0, 0; xi = 0, 1; r_core = 0.03;
                z0 = 1; seed = 0; path = field.csv; theta = 0.785; width = 0.05;
                noise = 0.0
    [model]     eps = 0.2, 0.1, 0.05; lam0 = 0; lam1 = ...; kappa = 0.1;
                kappa_s = 1e-6; hard = false
    [minimize]  step = armijo|fixed; dt = 1e-3; max_iter = 200; gtol = ...;
                bc = dirichlet|periodic|free; snapshot_every = 0; init = random|scenario
    [analysis]  entropies = kind=trig n=3; kind=trig n=5
                min_sep = ...; r_probe = ...; steps = 4, 6, 8, 12, 16, 24, 32
    [output]    dir = out

Lists are comma separated; entropy lists are separated by ``;``.  When
``lam1`` is omitted each stage uses ``lam1 = kappa / eps``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .entropies import EntropySpec, parse_entropy


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple:
    return tuple(float(p) for p in s.split(",") if p.strip())


def _ints(s: str) -> tuple:
    return tuple(int(p) for p in s.split(",") if p.strip())


def _pair(s: str) -> tuple:
    t = _floats(s)
    if len(t) != 2:
        raise ValueError("expected two comma-separated numbers")
    return t


def _entropies(s: str) -> tuple:
    return tuple(parse_entropy(p) for p in s.split(";") if p.strip())


SCHEMA = {
    "run": {"seed": int},
    "grid": {"n": int, "lo": float, "hi": float, "mask": str, "radius": float, "inner": float, "periodic": _bool},
    "scenario": {"name": str, "center": _pair, "xi": _pair, "a": _pair, "b": _pair, "r_core": float,
                 "z0": complex, "seed": int, "path": str, "theta": float, "width": float, "noise": float},
    "model": {"eps": _floats, "lam0": float, "lam1": float, "kappa": float, "kappa_s": float, "hard": _bool},
    "minimize": {"step": str, "dt": float, "max_iter": int, "gtol": float, "bc": str, "snapshot_every": int,
                 "init": str},
    "analysis": {"entropies": _entropies, "min_sep": float, "r_probe": float, "steps": _ints},
    "output": {"dir": str},
}

CHOICES = {
    ("grid", "mask"): ("square", "disk", "annulus"),
    ("minimize", "step"): ("armijo", "fixed"),
    ("minimize", "bc"): ("dirichlet", "periodic", "free"),
    ("minimize", "init"): ("random", "scenario"),
}


@dataclass
class RunConfig:
    seed: int = 0
    grid: dict = field(default_factory=lambda: {"n": 128, "lo": -1.0, "hi": 1.0, "mask": "square",
                                                "periodic": False})
    scenario: dict = field(default_factory=lambda: {"name": "vortex"})
    model: dict = field(default_factory=lambda: {"eps": (0.1,), "lam0": 0.0, "kappa": 0.1, "kappa_s": 1e-6,
                                                 "hard": False})
    minimize: dict = field(default_factory=lambda: {"step": "armijo", "dt": 1e-3, "max_iter": 200, "bc": "dirichlet",
                                                    "snapshot_every": 0, "init": "random"})
    analysis: dict = field(default_factory=lambda: {"entropies": (parse_entropy("kind=trig n=3"),
                                                                  parse_entropy("kind=trig n=5")),
                                                    "steps": (4, 6, 8, 12, 16, 24, 32)})
    output: dict = field(default_factory=lambda: {"dir": None})

    def entropies(self) -> tuple[EntropySpec, ...]:
        return tuple(self.analysis["entropies"])


def parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    cfg = RunConfig()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            try:
                val = SCHEMA[sec][key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {exc}") from exc
            choices = CHOICES.get((sec, key))
            if choices and val not in choices:
                raise ConfigError(f"{sec}.{key} must be one of {', '.join(choices)}, got {val!r}")
            if sec == "run":
                cfg.seed = val
            else:
                getattr(cfg, sec)[key] = val
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def validate(cfg: RunConfig) -> None:
    g = cfg.grid
    if g.get("n", 0) < 3:
        raise ConfigError("grid.n must be at least 3")
    if not g.get("hi", 1.0) > g.get("lo", -1.0):
        raise ConfigError("grid.hi must exceed grid.lo")
    eps = cfg.model.get("eps", ())
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("model.eps must be a nonempty list of positive numbers")
    if cfg.minimize.get("dt", 1.0) <= 0:
        raise ConfigError("minimize.dt must be positive")
    if cfg.minimize.get("max_iter", 1) < 0:
        raise ConfigError("minimize.max_iter must be nonnegative")
    if cfg.minimize.get("bc") == "periodic" and not g.get("periodic", False):
        raise ConfigError("minimize.bc = periodic needs grid.periodic = true")

"""Experiment configuration: defaults, strict key=value file parsing, and
CLI overrides. Unknown sections or keys are rejected so a typo cannot
silently change a convergence study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # [mesh]
    nx: int = 16
    ny: int | None = None
    # [scheme]
    problem: str = "manufactured"
    scheme: str = "spp"
    pair: str = ""
    dt: float = 0.1
    T: float = 1.0
    gamma: float = 0.0
    mu: float = 1.0
    eps: float = 0.01
    J: int = 20
    # [stochastic]
    viscosity: str = "uniform"      # uniform | constant | kl
    e_nu: float = 0.01              # mean of the uniform sample
    uniform_halfwidth: float = 0.1  # relative half-width of the sample
    nu: float = 0.001               # constant viscosity value
    kl_scale: float | None = None   # defaults chosen per problem
    kl_c: float = 1.0
    kl_l: float = 0.01
    kl_length: float | None = None  # defaults to the domain width
    kl_q: int = 2
    level: int = 1
    seed: int = 42
    # [output]
    out: str = "out"
    snapshots: int = 0
    threads: int = 1
    # keys set explicitly by a config file or a CLI flag (not defaults);
    # lets subcommands install their own documented defaults
    explicit: set = field(default_factory=set, compare=False, repr=False)

    def resolved(self, key: str, command_default):
        """Value for key honoring explicit settings over command defaults."""
        return getattr(self, key) if key in self.explicit else command_default

    def validate(self):
        if self.nx < 1 or (self.ny is not None and self.ny < 1):
            raise ConfigError("mesh cell counts must be positive")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("dt and T must be positive")
        if "dt" in self.explicit and "T" in self.explicit:
            steps = self.T / self.dt
            if abs(steps - round(steps)) > 1e-9:
                raise ConfigError(f"T/dt = {steps} is not an integer")
        if self.gamma < 0 or self.mu < 0 or self.eps < 0:
            raise ConfigError("gamma, mu, eps must be nonnegative")
        if self.J < 1:
            raise ConfigError("ensemble size J must be >= 1")
        if self.problem not in ("manufactured", "tgv", "step", "cavity"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.scheme not in ("coupled", "spp"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.viscosity == "leja":
            raise ConfigError(
                "leja collocation grids are not supported; use the "
                "clenshaw-curtis grids (viscosity = kl)")
        if self.viscosity not in ("uniform", "constant", "kl"):
            raise ConfigError(f"unknown viscosity source {self.viscosity!r}")
        if self.level < 0 or self.level > 4:
            raise ConfigError("sparse-grid level must be in 0..4")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self


_SECTIONS = {
    "mesh": ("nx", "ny"),
    "scheme": ("problem", "scheme", "pair", "dt", "T", "gamma", "mu",
               "eps", "J"),
    "stochastic": ("viscosity", "e_nu", "uniform_halfwidth", "nu",
                   "kl_scale", "kl_c", "kl_l", "kl_length", "kl_q",
                   "level", "seed"),
    "output": ("dir", "snapshots", "threads"),
}

_INT_KEYS = {"nx", "ny", "J", "kl_q", "level", "seed", "snapshots", "threads"}
_FLOAT_KEYS = {"dt", "T", "gamma", "mu", "eps", "e_nu", "uniform_halfwidth",
               "nu", "kl_scale", "kl_c", "kl_l", "kl_length"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: expected integer, got {raw!r}") \
                from exc
    if key in _FLOAT_KEYS:
        try:
            value = float(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: expected number, got {raw!r}") \
                from exc
        if not math.isfinite(value):
            raise ConfigError(f"key {key!r}: non-finite value")
        return value
    return raw


def parse_config(path) -> ExperimentConfig:
    """Read a sectioned key=value file into an ExperimentConfig."""
    cfg = ExperimentConfig()
    section = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                section = stripped[1:-1].strip()
                if section not in _SECTIONS:
                    raise ConfigError(
                        f"{path}:{lineno}: unknown section [{section}]")
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            if section is None:
                raise ConfigError(
                    f"{path}:{lineno}: key outside of any section")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in _SECTIONS[section]:
                raise ConfigError(
                    f"{path}:{lineno}: unknown key {key!r} in [{section}]")
            attr = "out" if key == "dir" else key
            setattr(cfg, attr, _convert(key, raw))
            cfg.explicit.add(attr)
    return cfg.validate()


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    """Fold parsed CLI flags into the config (flags win)."""
    for flag, attr in (("out", "out"), ("seed", "seed"),
                       ("threads", "threads"), ("nx", "nx"), ("ny", "ny"),
                       ("dt", "dt"), ("end_time", "T"), ("gamma", "gamma"),
                       ("mu", "mu"), ("eps", "eps"), ("ensemble_size", "J"),
                       ("scheme", "scheme"), ("pair", "pair"),
                       ("e_nu", "e_nu"), ("nu", "nu"), ("level", "level"),
                       ("snapshots", "snapshots"),
                       ("viscosity", "viscosity")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
            cfg.explicit.add(attr)
    return cfg.validate()

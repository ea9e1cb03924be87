"""Experiment configuration: TOML file + flag overrides -> resolved dict.

A config file is a single TOML document; every key can also be supplied
(or overridden) on the command line. The resolved configuration is hashed
(minus machine-local fields) and the hash is stamped into every output.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

try:
    import tomllib  # py >= 3.11
except ImportError:  # pragma: no cover
    import tomli as tomllib

from . import io, laplace, risk as riskmod
from .models import ModelSpec


class ConfigError(Exception):
    pass


DEFAULTS = {
    "seed": 0,
    "u": 1.0,
    "n": 10_000,
    "reps": 1_000,
    "r_exponent": 0.6,
    "out_dir": "runs",
    "workers": 0,  # 0 = all available cores
    "risk": "sup-norm",
    "mark": "none",
    "scaling": "analytic",
    "test_functions": ["flat-step", "bump-step", "flat-ramp", "bump-ramp",
                       "flat-indicator"],
    "window": 0,   # 0 = auto from the model's lag-decay bound
    "quad_points": 64,
    "n_grid": [1_000, 10_000, 100_000],
    "m_grid": [1, 2, 3, 5, 8, 12, 16, 20],
    "threshold_quantile": 0.995,
    "v_scales": [0.5, 1.0],
    "t_nodes": [0.25, 0.75],
    "samples": 1,
    "replication": 0,
    "normalization": "tail",
    "model": {"kind": "spatial-max-ar", "alpha": 1.0, "a": 0.5, "lam": 0.0,
              "sites": 1},
}

_RISKS = {
    "sup-norm": riskmod.sup_norm_risk,
    "coordinate": riskmod.coordinate_risk,
    "argmax": riskmod.argmax_risk,
}

_MARKS = {
    "none": lambda: None,
    "same-as-risk": lambda: riskmod.MarkFunctionalSpec(kind=riskmod.SAME_AS_RISK),
    "affected-fraction": lambda: riskmod.MarkFunctionalSpec(kind=riskmod.AFFECTED_FRACTION),
}


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e


def parse_model_flag(text: str) -> dict:
    """Parse 'a=0.5,alpha=1,sites=4,lam=0,kind=spatial-max-ar,seed=1'."""
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"model flag entry {part!r} is not key=value")
        k, v = part.split("=", 1)
        k = k.strip()
        v = v.strip()
        if k in ("alpha", "a", "lam"):
            out[k] = float(v)
        elif k in ("sites", "seed"):
            out[k] = int(v)
        elif k == "kind":
            out[k] = v
        else:
            raise ConfigError(f"unknown model field {k!r}")
    return out


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if v is None:
            continue
        if k == "model" and isinstance(v, dict):
            out["model"] = {**base.get("model", {}), **v}
        else:
            out[k] = v
    return out


@dataclass
class Experiment:
    """Resolved, validated experiment configuration."""

    raw: dict
    model: ModelSpec
    risk: riskmod.RiskFunctionalSpec
    mark: Optional[riskmod.MarkFunctionalSpec]
    test_functions: list
    out_dir: Path

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def workers(self) -> int:
        w = self.raw["workers"]
        return w if w > 0 else (os.cpu_count() or 1)

    def __getattr__(self, name):
        raw = object.__getattribute__(self, "raw")
        if name in raw:
            return raw[name]
        raise AttributeError(name)

    def config_hash(self) -> str:
        scientific = {k: v for k, v in self.raw.items()
                      if k not in ("out_dir", "workers")}
        return io.config_hash(scientific)


def resolve(file_config: Optional[dict] = None,
            overrides: Optional[dict] = None) -> Experiment:
    cfg = dict(DEFAULTS)
    cfg["model"] = dict(DEFAULTS["model"])
    if file_config:
        cfg = _merge(cfg, file_config)
    if overrides:
        cfg = _merge(cfg, overrides)

    model_cfg = dict(cfg["model"])
    model_cfg.setdefault("seed", cfg["seed"])
    try:
        model = ModelSpec.from_dict(model_cfg)
    except (ValueError, KeyError) as e:
        raise ConfigError(f"model: {e}") from e
    cfg["model"] = model.to_dict()

    if cfg["risk"] not in _RISKS:
        raise ConfigError(f"risk: unknown name {cfg['risk']!r}; "
                          f"known: {sorted(_RISKS)}")
    if cfg["mark"] not in _MARKS:
        raise ConfigError(f"mark: unknown name {cfg['mark']!r}; "
                          f"known: {sorted(_MARKS)}")
    try:
        tfs = [laplace.test_function(name) for name in cfg["test_functions"]]
    except KeyError as e:
        raise ConfigError(f"test_functions: {e}") from e

    for key in ("u", "r_exponent", "threshold_quantile"):
        if not cfg[key] > 0:
            raise ConfigError(f"{key} must be > 0")
    for key in ("n", "reps", "samples", "quad_points"):
        if int(cfg[key]) < 1:
            raise ConfigError(f"{key} must be >= 1")

    return Experiment(raw=cfg, model=model, risk=_RISKS[cfg["risk"]](),
                      mark=_MARKS[cfg["mark"]](), test_functions=tfs,
                      out_dir=Path(cfg["out_dir"]))

"""Experiment configuration: a single JSON file per experiment.

Every field has an explicit default and the fully resolved configuration
(defaults included) is echoed into each run manifest, so that the config
hash embedded in every output identifies the run completely.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .envelopes import KappaFunction, ProfileFunction
from .levy import LevyModel
from .potentials import Potential
from .simulate import RngSpec
from .spectral import Grid

DEFAULTS = {
    "model": {"family": "diffusion", "d": 1, "alpha": 0.0, "mu": 0.0,
              "beta": 0.0, "gamma": 0.0, "sigma2": 1.0},
    "potential": {"family": "polynomial", "d": 1, "degree": 1,
                  "coeff": 0.5, "offset": -0.5},
    "grid": {"d": 1, "half_width": 12.0, "n": 512},
    "solver": {"n_modes": 16, "auto_expand": True, "boundary_target": 1e-10,
               "max_n": 32768},
    "sampler": {"kind": "stationary", "n_samples": 1000000, "t_step": 1.0,
                "n_steps": 100, "dt": 0.01, "horizon": 50.0, "n_paths": 1,
                "burn_in": 10.0, "x0": 0.0, "eps_jump": None,
                "record_jumps": True},
    "profile": {"family": "log_power", "power": 0.5, "denom": 1.0,
                "exps": [], "kappa": "constant", "kappa_power": 0.0},
    "envelope": {"n_max": 1000000, "c_grid": None, "bisect": False,
                 "tail_exp_power": None},
    "seed": 1,
    "threads": 1,
}


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        data = _merge(copy.deepcopy(DEFAULTS), raw or {})
        return cls(data=data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path}: {exc}") from exc
        return cls.from_dict(raw)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def build_model(self) -> LevyModel:
        try:
            return LevyModel.from_config(self.data["model"])
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"model: {exc}") from exc

    def build_potential(self) -> Potential:
        try:
            return Potential.from_config(self.data["potential"])
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"potential: {exc}") from exc

    def build_grid(self) -> Grid:
        g = self.data["grid"]
        try:
            return Grid(d=int(g["d"]), half_width=float(g["half_width"]),
                        n=int(g["n"]))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def build_profile(self) -> ProfileFunction:
        p = self.data["profile"]
        try:
            if p["family"] == "log_power":
                return ProfileFunction.log_pow(float(p["power"]))
            if p["family"] == "power_log":
                if not p.get("exps"):
                    raise ValueError(
                        "power_log profile needs its iterated-log exponents "
                        "('exps': [2 theta_1 + 1, ..., 2 theta_k + delta], "
                        "the last entry carrying the free delta)")
                return ProfileFunction.power_with_logs(float(p["denom"]),
                                                       [float(e) for e in p["exps"]])
            raise ValueError(f"unknown profile family {p['family']!r} "
                             "(expected log_power or power_log)")
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"profile: {exc}") from exc

    def build_kappa(self) -> KappaFunction:
        p = self.data["profile"]
        if p.get("kappa", "constant") == "constant":
            return KappaFunction.constant(1.0)
        if p["kappa"] == "power":
            return KappaFunction.power(float(p["kappa_power"]))
        raise ConfigError(f"profile.kappa: unknown kind {p['kappa']!r}")

    def rng(self, stream: int = 0) -> RngSpec:
        return RngSpec(seed=int(self.data["seed"]), stream=stream)

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def threads(self) -> int:
        return int(self.data.get("threads", 1))


def _merge(base: dict, extra: dict) -> dict:
    for key, val in extra.items():
        if key in base and isinstance(base[key], dict) and isinstance(val, dict):
            _merge(base[key], val)
        else:
            base[key] = val
    return base

"""Run configuration: INI file parsing, validation, and the run manifest.

Sections and keys are fixed (model.variant, model.sigma, basis.family,
basis.epsilon_h, payoff.kind, payoff.strike, psi.variant, theta.theta,
theta.steps, quad.abs_tol, ...); unknown sections or keys are rejected so
typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field

from .basis import BasisFamily, make_family
from .localization import AuxiliaryFunction, Payoff, default_eta, make_aux
from .models import CGMY, NIG, BlackScholes, LevyModel, Merton
from .quadrature import QuadratureConfig
from .timestepping import ThetaConfig

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Configuration file is malformed or inconsistent."""


_MODEL_PARAMS = {
    "bs": ("sigma",),
    "merton": ("sigma", "lambda", "alpha", "beta"),
    "cgmy": ("c", "g", "m", "y", "sigma"),
    "nig": ("alpha", "beta", "delta", "sigma"),
}

_SCHEMA = {
    "model": {"variant", "r", "sigma", "lambda", "alpha", "beta",
              "c", "g", "m", "y", "delta", "drift_offset"},
    "basis": {"family", "n", "a", "b", "epsilon_h", "align_strike"},
    "payoff": {"kind", "strike", "eta"},
    "psi": {"variant", "sigma_psi", "sigma_bs"},
    "theta": {"theta", "horizon", "steps"},
    "quad": {"abs_tol", "rel_tol", "xi_max", "max_subdivisions"},
    "assembly": {"method", "fft_samples"},
    "eoc": {"levels", "true_level"},
    "distort": {"d_min", "d_max", "rel_floor"},
    "run": {"seed"},
}

_DEFAULTS = {
    "basis.epsilon_h": 0.3,
    "basis.align_strike": False,
    "psi.variant": "qhs_normal",
    "psi.sigma_psi": 0.25,
    "theta.theta": 0.5,
    "quad.abs_tol": 1e-10,
    "quad.rel_tol": 1e-10,
    "quad.max_subdivisions": 24,
    "assembly.method": "auto",
    "eoc.levels": "4:9",
    "eoc.true_level": 11,
    "distort.d_min": 3,
    "distort.d_max": 8,
    "distort.rel_floor": 1e-3,
    "run.seed": 0,
}


@dataclass
class RunConfig:
    """Validated configuration with every default made explicit."""

    raw: dict
    resolved: dict = field(default_factory=dict)

    def get(self, dotted: str, default=None):
        if dotted in self.raw:
            return self.raw[dotted]
        if default is not None or dotted in _DEFAULTS:
            value = _DEFAULTS.get(dotted, default) if default is None else default
            self.resolved[dotted] = value
            return value
        raise ConfigError(f"missing required config key '{dotted}'")

    def get_float(self, dotted: str, default=None) -> float:
        try:
            return float(self.get(dotted, default))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key '{dotted}' must be a number") from exc

    def get_int(self, dotted: str, default=None) -> int:
        value = self.get(dotted, default)
        try:
            as_float = float(value)
            as_int = int(as_float)
            if as_int != as_float:
                raise ValueError
            return as_int
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key '{dotted}' must be an integer") from exc

    def get_bool(self, dotted: str, default=None) -> bool:
        value = self.get(dotted, default)
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key '{dotted}' must be a boolean")

    # -- builders -----------------------------------------------------------

    def build_model(self) -> LevyModel:
        variant = str(self.get("model.variant")).lower()
        if variant not in _MODEL_PARAMS:
            raise ConfigError(
                f"model.variant must be one of {sorted(_MODEL_PARAMS)}, "
                f"got {variant!r}")
        r = self.get_float("model.r")
        offset = self.get_float("model.drift_offset", 0.0)
        try:
            if variant == "bs":
                return BlackScholes(sigma=self.get_float("model.sigma"), r=r,
                                    drift_offset=offset)
            if variant == "merton":
                return Merton(sigma=self.get_float("model.sigma"),
                              lam=self.get_float("model.lambda"),
                              alpha=self.get_float("model.alpha"),
                              beta=self.get_float("model.beta"), r=r,
                              drift_offset=offset)
            if variant == "cgmy":
                return CGMY(C=self.get_float("model.c"),
                            G=self.get_float("model.g"),
                            M=self.get_float("model.m"),
                            Y=self.get_float("model.y"),
                            sigma=self.get_float("model.sigma", 0.0), r=r,
                            drift_offset=offset)
            return NIG(alpha=self.get_float("model.alpha"),
                       beta=self.get_float("model.beta"),
                       delta=self.get_float("model.delta"),
                       sigma=self.get_float("model.sigma", 0.0), r=r,
                       drift_offset=offset)
        except ValueError as exc:
            raise ConfigError(f"model parameters: {exc}") from exc

    def build_family(self) -> BasisFamily:
        name = str(self.get("basis.family")).lower()
        align = None
        if self.get_bool("basis.align_strike"):
            import math
            align = math.log(self.get_float("payoff.strike"))
        try:
            return make_family(name, self.get_float("basis.a"),
                               self.get_float("basis.b"),
                               self.get_int("basis.n"),
                               epsilon_h=self.get_float("basis.epsilon_h"),
                               align_strike=align)
        except ValueError as exc:
            raise ConfigError(f"basis parameters: {exc}") from exc

    def build_payoff(self, model: LevyModel) -> Payoff:
        kind = str(self.get("payoff.kind")).lower()
        if kind not in ("call", "put"):
            raise ConfigError(f"payoff.kind must be 'call' or 'put', got {kind!r}")
        strike = self.get_float("payoff.strike")
        eta = self.raw.get("payoff.eta")
        if eta is None:
            eta_val = default_eta(kind, model)
            self.resolved["payoff.eta"] = eta_val
        else:
            eta_val = float(eta)
            model.damping_strip().require(eta_val, "payoff.eta")
        try:
            return Payoff(kind=kind, strike=strike, eta=eta_val)
        except ValueError as exc:
            raise ConfigError(f"payoff parameters: {exc}") from exc

    def build_aux(self, payoff: Payoff, model: LevyModel) -> AuxiliaryFunction:
        variant = str(self.get("psi.variant")).lower()
        sigma_bs = self.raw.get("psi.sigma_bs")
        aux = make_aux(variant, payoff, model,
                       sigma_psi=self.get_float("psi.sigma_psi"),
                       sigma_bs=float(sigma_bs) if sigma_bs is not None else None)
        if variant == "bs_price" and sigma_bs is None:
            self.resolved["psi.sigma_bs"] = aux.sigma_bs
        return aux

    def build_theta(self) -> ThetaConfig:
        try:
            return ThetaConfig(horizon=self.get_float("theta.horizon"),
                               steps=self.get_int("theta.steps"),
                               theta=self.get_float("theta.theta"))
        except ValueError as exc:
            raise ConfigError(f"theta parameters: {exc}") from exc

    def build_quad(self) -> QuadratureConfig:
        xi_max = self.raw.get("quad.xi_max")
        if xi_max is None:
            self.resolved["quad.xi_max"] = "auto"
        try:
            return QuadratureConfig(
                abs_tol=self.get_float("quad.abs_tol"),
                rel_tol=self.get_float("quad.rel_tol"),
                xi_max=float(xi_max) if xi_max is not None else None,
                max_subdivisions=self.get_int("quad.max_subdivisions"))
        except ValueError as exc:
            raise ConfigError(f"quad parameters: {exc}") from exc

    def eoc_levels(self) -> list[int]:
        text = str(self.get("eoc.levels"))
        try:
            if ":" in text:
                lo, hi = text.split(":")
                levels = list(range(int(lo), int(hi) + 1))
            else:
                levels = [int(v) for v in text.split(",")]
        except ValueError as exc:
            raise ConfigError("eoc.levels must be 'lo:hi' or a comma list") from exc
        if not levels:
            raise ConfigError("eoc.levels is empty")
        return levels

    def manifest(self, seed: int, extra: dict | None = None) -> dict:
        """Everything needed to reproduce the run: explicit keys, resolved
        defaults, and the seed."""
        from . import __version__

        return {
            "levyfem_version": __version__,
            "seed": seed,
            "config": dict(sorted(self.raw.items())),
            "resolved_defaults": dict(sorted(self.resolved.items())),
            **(extra or {}),
        }

    def write_manifest(self, path, seed: int, extra: dict | None = None) -> None:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(self.manifest(seed, extra), fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    raw = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key '{section}.{key}'")
            raw[f"{section}.{key}"] = value
    return RunConfig(raw=raw)

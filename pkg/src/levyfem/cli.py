"""Command-line front end: price | eoc | distort | validate.

Every command reads one INI config, writes its CSV outputs plus a JSON run
manifest (resolved defaults, seed, tolerances) into --out, and exits nonzero
on the first configuration or validation problem, naming the offending key.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import studies
from .config import ConfigError, RunConfig, load_config
from .localization import Payoff, default_eta
from .models import BlackScholes, StripError
from .quadrature import QuadratureConfig
from .studies import (distortion_study, eoc_study, reference_price,
                      solve_pricing_problem)

__all__ = ["main"]


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("LEVYFEM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"LEVYFEM_THREADS must be an integer, got {env!r}")
    return 1


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_price(cfg: RunConfig, args) -> int:
    model = cfg.build_model()
    payoff = cfg.build_payoff(model)
    family = cfg.build_family()
    aux = cfg.build_aux(payoff, model)
    theta = cfg.build_theta()
    quad = cfg.build_quad()
    method = str(cfg.get("assembly.method")).lower()
    run = solve_pricing_problem(model, family, payoff, aux, theta, quad,
                                assembly_method=method, threads=_threads(args))
    out = _outdir(args)
    run.surface.to_csv(out / "surface.csv")
    cfg.write_manifest(out / "manifest.json", seed=args.seed,
                       extra={"command": "price",
                              "outputs": ["surface.csv"]})
    print(f"wrote {out / 'surface.csv'} "
          f"({run.surface.times.size} x {run.surface.points.size} values)")
    return 0


def cmd_eoc(cfg: RunConfig, args) -> int:
    model = cfg.build_model()
    family_name = str(cfg.get("basis.family")).lower()
    theta = cfg.build_theta()
    quad = cfg.build_quad()
    eta = cfg.raw.get("payoff.eta")
    report = eoc_study(
        model, family_name, levels=cfg.eoc_levels(),
        true_level=cfg.get_int("eoc.true_level"),
        domain=(cfg.get_float("basis.a"), cfg.get_float("basis.b")),
        n_time=theta.steps + 1, horizon=theta.horizon, theta=theta.theta,
        sigma_psi=cfg.get_float("psi.sigma_psi"),
        strike=cfg.get_float("payoff.strike"),
        eta=float(eta) if eta is not None else None,
        quad=quad, threads=_threads(args))
    out = _outdir(args)
    report.to_csv(out / "eoc_report.csv")
    report.plot_data(out / "eoc_plot.csv")
    cfg.write_manifest(out / "manifest.json", seed=args.seed,
                       extra={"command": "eoc",
                              "outputs": ["eoc_report.csv", "eoc_plot.csv"]})
    for k, n, e in zip(report.levels, report.n_values, report.errors):
        print(f"level {k}: N={n}, L2 error = {e:.6e}")
    print(f"fitted slope (log error vs log h): {report.slope:.3f}")
    return 0


def cmd_distort(cfg: RunConfig, args) -> int:
    model = cfg.build_model()
    if not isinstance(model, BlackScholes):
        raise ConfigError("distortion study requires model.variant = bs")
    family_name = str(cfg.get("basis.family")).lower()
    if family_name != "hat":
        raise ConfigError("distortion study requires basis.family = hat")
    theta = cfg.build_theta()
    d_values = tuple(range(cfg.get_int("distort.d_min"),
                           cfg.get_int("distort.d_max") + 1))
    report = distortion_study(
        seed=args.seed, d_values=d_values, n=cfg.get_int("basis.n"),
        sigma=model.sigma, r=model.r, strike=cfg.get_float("payoff.strike"),
        s_min=math.exp(cfg.get_float("basis.a")),
        s_max=math.exp(cfg.get_float("basis.b")),
        horizon=theta.horizon, steps=theta.steps, theta=theta.theta,
        sigma_psi=cfg.get_float("psi.sigma_psi"), quad=cfg.build_quad(),
        rel_floor=cfg.get_float("distort.rel_floor"))
    out = _outdir(args)
    report.to_csv(out / "distortion_report.csv")
    report.plot_data(out / "distortion_plot.csv")
    cfg.write_manifest(out / "manifest.json", seed=args.seed,
                       extra={"command": "distort",
                              "outputs": ["distortion_report.csv",
                                          "distortion_plot.csv"]})
    for d, mx in zip(report.d_values, report.max_abs):
        print(f"D={d}: max abs price difference = {mx:.6e}")
    print(f"fitted log10 slope: {report.slope:.3f}")
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    checks = []

    def run_check(name, fn):
        try:
            fn()
        except Exception as exc:  # report, do not abort the suite
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))
        else:
            checks.append((name, True, ""))

    state = {}

    def build():
        model = cfg.build_model()
        if args.drift_offset:
            import dataclasses
            model = dataclasses.replace(
                model, drift_offset=model.drift_offset + args.drift_offset)
        state["model"] = model

    run_check("config", build)
    model = state.get("model")

    if model is not None:
        def payoff_strip():
            kind = str(cfg.get("payoff.kind", "call")).lower()
            eta = cfg.raw.get("payoff.eta")
            if eta is None:
                default_eta(kind, model)
            else:
                model.damping_strip().require(float(eta), "payoff.eta")
                Payoff(kind, cfg.get_float("payoff.strike", 1.0), float(eta))

        def symbol_origin():
            value = abs(model.symbol(0.0))
            if value > 1e-12:
                raise AssertionError(f"|A(0)| = {value:.2e} > 1e-12")

        def symbol_parity():
            rng = np.random.default_rng(0)
            xi = rng.uniform(-100.0, 100.0, 1000)
            a_pos = model.symbol(xi)
            a_neg = model.symbol(-xi)
            gap = np.max(np.abs(a_neg - np.conj(a_pos)))
            scale = max(1.0, float(np.max(np.abs(a_pos))))
            if gap > 1e-12 * scale:
                raise AssertionError(f"parity violation {gap:.2e}")

        def martingale():
            for t in (0.5, 1.0, 2.0):
                gap = abs(math.e ** 0 - np.exp(-t * (model.symbol(1j) + model.r)))
                if abs(gap) > 1e-10:
                    raise AssertionError(
                        f"|e^(-rt) E e^(L_t) - 1| = {abs(gap):.2e} at t={t}")

        def char_bound():
            u = np.linspace(-50.0, 50.0, 101)
            mags = np.abs(model.characteristic_function(1.0, u))
            if np.max(mags) > 1.0 + 1e-12:
                raise AssertionError(f"|cf| max {np.max(mags):.6f} > 1")

        def mass_spd():
            import scipy.linalg
            from .basis import make_family
            fam = make_family(str(cfg.get("basis.family", "spline")).lower(),
                              cfg.get_float("basis.a", -5.0),
                              cfg.get_float("basis.b", 5.0),
                              min(cfg.get_int("basis.n", 33), 33),
                              epsilon_h=cfg.get_float("basis.epsilon_h"))
            scipy.linalg.cholesky(fam.mass_matrix(QuadratureConfig()).to_dense())

        def bs_anchor():
            from scipy.special import ndtr
            bs = BlackScholes(sigma=0.2, r=0.01)
            payoff = Payoff("call", 1.0, -1.5)
            for t, x in ((0.5, -0.2), (1.0, 0.0), (2.0, 0.3)):
                got = reference_price(bs, payoff, t, x)
                vol = 0.2 * math.sqrt(t)
                d1 = (x + (0.01 + 0.02) * t) / vol
                d2 = d1 - vol
                want = math.exp(x) * ndtr(d1) - math.exp(-0.01 * t) * ndtr(d2)
                if abs(got - want) > 1e-8:
                    raise AssertionError(
                        f"reference vs closed form: {abs(got - want):.2e}")

        run_check("payoff_strip", payoff_strip)
        run_check("symbol_origin", symbol_origin)
        run_check("symbol_parity", symbol_parity)
        run_check("martingale", martingale)
        run_check("char_bound", char_bound)
        run_check("mass_spd", mass_spd)
        run_check("bs_anchor", bs_anchor)

    failed = 0
    for name, ok, reason in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {reason}" if reason else ""))
        failed += 0 if ok else 1
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levyfem",
        description="Symbol-based Galerkin FEM option pricing under Levy models")
    parser.add_argument("command", choices=["price", "eoc", "distort", "validate"])
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=None,
                        help="parallel lag assembly (default: LEVYFEM_THREADS or 1)")
    parser.add_argument("--drift-offset", type=float, default=0.0,
                        help="validate only: additive drift perturbation")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        handler = {"price": cmd_price, "eoc": cmd_eoc,
                   "distort": cmd_distort, "validate": cmd_validate}[args.command]
        return handler(cfg, args)
    except (ConfigError, StripError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Reference pricer and the two empirical studies.

The Feynman-Kac pricer inverts the damped payoff transform against the
model's symbol and serves as the independent oracle for the FEM surfaces;
for the Black-Scholes model it must agree with the closed-form price, which
anchors every sign convention in the package.  The two studies reproduce the
distortion-propagation experiment (hat basis, closed-form matrices) and the
empirical order of convergence runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import assembly
from .basis import BasisFamily, make_family, nodal_synthesis
from .localization import (AuxiliaryFunction, Payoff, QhsNormalAux, bs_provider,
                           default_eta, initial_coefficients, payoff_hat,
                           qhs_provider)
from .models import BlackScholes, LevyModel
from .quadrature import GK_NODES, GK_WEIGHTS, QuadratureConfig, QuadratureError
from .timestepping import PriceSurface, ThetaConfig, run_theta

__all__ = [
    "reference_price",
    "reference_prices",
    "solve_pricing_problem",
    "PricingRun",
    "EocReport",
    "eoc_study",
    "DistortionReport",
    "distortion_study",
]


def _price_cutoff(model: LevyModel, payoff: Payoff, t: float, tol: float) -> float:
    eta = payoff.eta
    k = payoff.strike
    floor = abs(eta * (eta + 1.0))

    def env(xi):
        ghat = k ** (1.0 + eta) / max(0.5 * xi * xi, floor)
        decay = math.exp(-t * float(model.symbol(xi - 1j * eta).real))
        return ghat * decay

    xi = 1.0
    for _ in range(400):
        if env(xi) * max(xi, 1.0) <= 0.1 * tol:
            return xi
        xi *= 1.2
    raise QuadratureError("reference price integrand does not decay; check eta")


def reference_prices(model: LevyModel, payoff: Payoff, t: float, xs,
                     quad: QuadratureConfig | None = None) -> np.ndarray:
    """Feynman-Kac prices e^{-rt} E[g(L_t + x)] for all log-spots xs at once.

    Damped Fourier inversion of the payoff transform against exp(-t*A) on a
    shared panel grid, refined until the worst point converges.  t = 0
    returns the payoff exactly.
    """
    quad = quad or QuadratureConfig()
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if t < 0:
        raise ValueError(f"time to maturity must be >= 0, got {t!r}")
    if t == 0.0:
        return payoff.value(xs)
    eta = payoff.eta
    model.damping_strip().require(eta, "payoff damping")
    xi_cut = _price_cutoff(model, payoff, t, quad.abs_tol)

    def gvals(xi):
        z = xi - 1j * eta
        return payoff_hat(payoff, xi) * np.exp(-t * model.symbol(z))

    freq = float(np.max(np.abs(xs))) + abs(math.log(payoff.strike)) \
        + t * (abs(model.b) + 1.0) + 1.0
    npanels = min(max(16, int(math.ceil(xi_cut * freq / math.pi))), 200_000)

    def evaluate(panels: int) -> np.ndarray:
        edges = np.linspace(0.0, xi_cut, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        pts = (mid[:, None] + half * GK_NODES[None, :]).ravel()
        gw = gvals(pts) * np.tile(GK_WEIGHTS * half, panels)
        gre = np.ascontiguousarray(gw.real)
        gim = np.ascontiguousarray(gw.imag)
        out = np.empty(xs.size)
        chunk = max(1, int(2_000_000 // max(pts.size, 1)))
        for s in range(0, xs.size, chunk):
            xcol = xs[s:s + chunk, None]
            out[s:s + chunk] = (np.cos(pts[None, :] * xcol) @ gre
                                + np.sin(pts[None, :] * xcol) @ gim)
        return out / math.pi

    prev = evaluate(npanels)
    for _ in range(quad.max_subdivisions):
        npanels *= 2
        cur = evaluate(npanels)
        worst = float(np.max(np.abs(cur - prev)))
        if worst <= max(quad.abs_tol, quad.rel_tol * float(np.max(np.abs(cur)))):
            return np.exp(-eta * xs) * math.exp(-model.r * t) * cur
        prev = cur
    raise QuadratureError("reference price quadrature did not converge")


def reference_price(model: LevyModel, payoff: Payoff, t: float, x: float,
                    quad: QuadratureConfig | None = None) -> float:
    return float(reference_prices(model, payoff, t, [x], quad)[0])


@dataclass(frozen=True)
class PricingRun:
    """One localized theta-scheme run with its reconstructed nodal surface."""

    surface: PriceSurface
    trajectory: np.ndarray
    family: BasisFamily
    aux: AuxiliaryFunction
    mass: object
    stiffness: object


def _psi_on_grid(aux: AuxiliaryFunction, times: np.ndarray,
                 points: np.ndarray) -> np.ndarray:
    return np.vstack([np.asarray(aux.value(float(t), points)) for t in times])


def solve_pricing_problem(model: LevyModel, family: BasisFamily, payoff: Payoff,
                          aux: AuxiliaryFunction, cfg: ThetaConfig,
                          quad: QuadratureConfig | None = None,
                          assembly_method: str = "auto", threads: int = 1,
                          stiffness=None) -> PricingRun:
    """Assemble, localize, run the theta scheme, and reconstruct nodal prices.

    assembly_method: "quadrature", "fft", "closed_form" (hat/BS only), or
    "auto" (quadrature up to N=64, FFT beyond).  A prebuilt `stiffness`
    matrix overrides assembly (used by the distortion study).
    """
    quad = quad or QuadratureConfig()
    n = family.grid.n
    if stiffness is None:
        method = assembly_method
        if method == "auto":
            method = "quadrature" if n <= 64 else "fft"
        if method == "closed_form":
            if not isinstance(model, BlackScholes) or family.name != "hat":
                raise ValueError("closed-form matrices are the BS/hat special case")
            stiffness = assembly.stiffness_bs_closed_form(model.sigma, model.r,
                                                          family.grid)
        elif method == "fft":
            stiffness = assembly.stiffness_fft(model, family, quad=quad)
        elif method == "quadrature":
            stiffness = assembly.stiffness_symbol(model, family, quad,
                                                  threads=threads)
        else:
            raise ValueError(f"unknown assembly method {assembly_method!r}")
    mass = family.mass_matrix(quad)
    if isinstance(aux, QhsNormalAux):
        rhs = qhs_provider(aux, model, family, quad)
    else:
        rhs = bs_provider(aux, model, family, cfg.times, quad)
    alpha = initial_coefficients(payoff, aux, family, quad)
    traj = run_theta(mass, stiffness, rhs, alpha, cfg)
    points = family.grid.nodes
    values = nodal_synthesis(family, traj) + _psi_on_grid(aux, cfg.times, points)
    surface = PriceSurface(
        times=cfg.times, points=points, values=values,
        metadata={"model": model.name, "family": family.name,
                  "payoff": payoff.kind, "strike": payoff.strike,
                  "eta": payoff.eta, "psi": aux.variant})
    return PricingRun(surface=surface, trajectory=traj, family=family,
                      aux=aux, mass=mass, stiffness=stiffness)


@dataclass(frozen=True)
class EocReport:
    """Discrete L2 errors against the same-basis level-11 surface."""

    model: str
    family: str
    levels: tuple
    n_values: tuple
    h_values: tuple
    errors: tuple
    slope: float
    true_level: int

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("level,n,h,l2_error\n")
            for k, n, h, e in zip(self.levels, self.n_values, self.h_values,
                                  self.errors):
                fh.write(f"{k},{n},{h:.17g},{e:.17g}\n")
            fh.write(f"slope,,,{self.slope:.17g}\n")

    def plot_data(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("log10_n,log10_error\n")
            for n, e in zip(self.n_values, self.errors):
                fh.write(f"{math.log10(n):.17g},{math.log10(e):.17g}\n")


def _study_surface(model: LevyModel, family_name: str, n: int, payoff: Payoff,
                   cfg: ThetaConfig, domain, sigma_psi: float,
                   quad: QuadratureConfig, threads: int) -> PriceSurface:
    family = make_family(family_name, domain[0], domain[1], n)
    aux = QhsNormalAux(payoff=payoff, r=model.r, sigma_psi=sigma_psi)
    run = solve_pricing_problem(model, family, payoff, aux, cfg, quad,
                                assembly_method="fft", threads=threads)
    return run.surface


def discrete_l2_error(true_surface: PriceSurface, coarse: PriceSurface,
                      dt_true: float, h_true: float) -> float:
    """sqrt(dt*h*sum of squared differences), coarse linearly interpolated
    in space onto the true nodes."""
    diff2 = 0.0
    for i in range(true_surface.times.size):
        interp = np.interp(true_surface.points, coarse.points, coarse.values[i])
        d = true_surface.values[i] - interp
        diff2 += float(d @ d)
    return math.sqrt(dt_true * h_true * diff2)


def eoc_study(model: LevyModel, family_name: str, levels=tuple(range(4, 10)),
              true_level: int = 11, domain=(-5.0, 5.0), n_time: int = 2000,
              horizon: float = 2.0, theta: float = 0.5, sigma_psi: float = 0.25,
              strike: float = 1.0, eta: float | None = None,
              quad: QuadratureConfig | None = None, threads: int = 1) -> EocReport:
    """Empirical order of convergence for a call against the level-`true_level`
    surface of the same basis: N_k = 1 + 2^k nodes, shared 2000-node time grid."""
    quad = quad or QuadratureConfig()
    if eta is None:
        eta = default_eta("call", model)
    payoff = Payoff("call", strike, eta)
    cfg = ThetaConfig(horizon=horizon, steps=n_time - 1, theta=theta)
    n_true = 1 + 2**true_level
    true_surface = _study_surface(model, family_name, n_true, payoff, cfg,
                                  domain, sigma_psi, quad, threads)
    h_true = true_surface.points[1] - true_surface.points[0]
    errors = []
    h_values = []
    n_values = []
    for k in levels:
        n_k = 1 + 2**k
        coarse = _study_surface(model, family_name, n_k, payoff, cfg, domain,
                                sigma_psi, quad, threads)
        errors.append(discrete_l2_error(true_surface, coarse, cfg.dt, h_true))
        h_values.append(coarse.points[1] - coarse.points[0])
        n_values.append(n_k)
    slope = float(np.polyfit(np.log(h_values), np.log(errors), 1)[0])
    return EocReport(model=model.name, family=family_name, levels=tuple(levels),
                     n_values=tuple(n_values), h_values=tuple(h_values),
                     errors=tuple(errors), slope=slope, true_level=true_level)


@dataclass(frozen=True)
class DistortionReport:
    """Price differences caused by lag-wise stiffness distortions of size
    10^{-(D-1)}."""

    seed: int
    d_values: tuple
    max_abs: tuple
    mean_abs: tuple
    max_rel: tuple
    slope: float
    baseline_max: float
    config: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"# seed={self.seed}\n")
            fh.write("d,max_abs_diff,mean_abs_diff,max_rel_diff\n")
            for d, mx, mn, rel in zip(self.d_values, self.max_abs,
                                      self.mean_abs, self.max_rel):
                fh.write(f"{d},{mx:.17g},{mn:.17g},{rel:.17g}\n")
            fh.write(f"slope,,,{self.slope:.17g}\n")

    def plot_data(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("d,log10_max_abs_diff\n")
            for d, mx in zip(self.d_values, self.max_abs):
                fh.write(f"{d},{math.log10(mx):.17g}\n")


def distortion_study(seed: int, d_values=tuple(range(3, 9)), n: int = 150,
                     sigma: float = 0.2, r: float = 0.01, strike: float = 1.0,
                     s_min: float = 0.01, s_max: float = 10.0,
                     horizon: float = 3.0, steps: int = 600,
                     theta: float = 0.5, sigma_psi: float = 0.25,
                     quad: QuadratureConfig | None = None,
                     rel_floor: float = 1e-3) -> DistortionReport:
    """Propagate stiffness-entry distortions to Black-Scholes put prices.

    Hat basis with the closed-form tridiagonal matrices; each D run adds
    10^{-(D-1)}-scale noise per Toeplitz lag (same seed, so only the scale
    varies) and reports surface differences against the undistorted run.
    """
    if any(d < 1 for d in d_values):
        raise ValueError("distortion digits must be >= 1")
    quad = quad or QuadratureConfig()
    model = BlackScholes(sigma=sigma, r=r)
    family = make_family("hat", math.log(s_min), math.log(s_max), n)
    payoff = Payoff("put", strike, default_eta("put", model))
    aux = QhsNormalAux(payoff=payoff, r=model.r, sigma_psi=sigma_psi)
    cfg = ThetaConfig(horizon=horizon, steps=steps, theta=theta)
    base = solve_pricing_problem(model, family, payoff, aux, cfg, quad,
                                 assembly_method="closed_form")
    base_vals = base.surface.values
    visible = np.abs(base_vals) >= rel_floor
    max_abs, mean_abs, max_rel = [], [], []
    for d in d_values:
        distorted = assembly.distort(base.stiffness, d, seed)
        run = solve_pricing_problem(model, family, payoff, aux, cfg, quad,
                                    stiffness=distorted)
        diff = np.abs(run.surface.values - base_vals)
        max_abs.append(float(diff.max()))
        mean_abs.append(float(diff.mean()))
        max_rel.append(float((diff[visible] / np.abs(base_vals[visible])).max()))
    slope = float(np.polyfit(d_values, np.log10(max_abs), 1)[0])
    return DistortionReport(
        seed=seed, d_values=tuple(d_values), max_abs=tuple(max_abs),
        mean_abs=tuple(mean_abs), max_rel=tuple(max_rel), slope=slope,
        baseline_max=float(np.abs(base_vals).max()),
        config={"n": n, "sigma": sigma, "r": r, "strike": strike,
                "s_min": s_min, "s_max": s_max, "horizon": horizon,
                "steps": steps, "theta": theta})

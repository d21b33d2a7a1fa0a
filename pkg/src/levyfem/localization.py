"""Localization to zero boundary values on the truncated log-price domain.

Subtracting an auxiliary function psi with the option's asymptotics turns the
pricing problem into one with a compactly concentrated solution; the price is
recovered by adding psi back pointwise.  Two psi variants are provided: the
Black-Scholes price (time enters the Fourier integrals, so the load vector is
recomputed per time node) and the smoothed hockey stick (e^x - K e^{-rt})
times a normal CDF, whose two load integrals are time-independent.

All load vectors are damped Fourier integrals

    F_j = e^{-eta x_j} / pi * int_0^inf Re(G(xi) e^{-i xi x_j}) dxi

evaluated on one shared adaptive panel grid for all j at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import ndtr

from .models import BlackScholes, LevyModel, StripError
from .quadrature import QuadratureConfig, QuadratureError
from .quadrature import GK_NODES, GK_WEIGHTS, adaptive_panels

__all__ = [
    "Payoff",
    "default_eta",
    "payoff_hat",
    "AuxiliaryFunction",
    "BsPriceAux",
    "QhsNormalAux",
    "make_aux",
    "rhs_qhs",
    "rhs_bs",
    "initial_coefficients",
]


@dataclass(frozen=True)
class Payoff:
    """Vanilla call/put with strike K and damping weight eta.

    The damped payoff e^{eta x} g(x) must be integrable: eta < -1 for calls,
    eta > 0 for puts.
    """

    kind: str
    strike: float
    eta: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ValueError(f"payoff kind must be 'call' or 'put', got {self.kind!r}")
        if not self.strike > 0:
            raise ValueError(f"strike must be > 0, got {self.strike!r}")
        if self.kind == "call" and not self.eta < -1.0:
            raise ValueError(
                f"call payoff needs eta < -1 for integrability, got {self.eta!r}")
        if self.kind == "put" and not self.eta > 0.0:
            raise ValueError(
                f"put payoff needs eta > 0 for integrability, got {self.eta!r}")

    @property
    def is_call(self) -> bool:
        return self.kind == "call"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        s = np.exp(x)
        out = np.maximum(s - self.strike, 0.0) if self.is_call \
            else np.maximum(self.strike - s, 0.0)
        return out if out.ndim else float(out)


def default_eta(kind: str, model: LevyModel, margin: float = 0.1) -> float:
    """Default damping (-1.5 call, +0.5 put), clipped inside the model strip."""
    strip = model.damping_strip()
    lo = strip.lo + margin if math.isfinite(strip.lo) else -math.inf
    hi = strip.hi - margin if math.isfinite(strip.hi) else math.inf
    eta = min(max(-1.5 if kind == "call" else 0.5, lo), hi)
    ok = (eta < -1.0) if kind == "call" else (eta > 0.0)
    if not (ok and strip.contains(eta)):
        raise StripError(
            f"no admissible damping for a {kind} in the strip "
            f"({strip.lo:g}, {strip.hi:g}) with margin {margin:g}: "
            + ("calls need eta < -1" if kind == "call" else "puts need eta > 0"))
    return eta


def payoff_hat(payoff: Payoff, xi):
    """Damped payoff transform int e^{i xi x} e^{eta x} g(x) dx.

    Both call (eta < -1) and put (eta > 0) give the same rational expression
    K^{1+eta+i xi} / ((i xi + eta)(i xi + eta + 1)) on their disjoint eta
    ranges.
    """
    z = 1j * np.asarray(xi, dtype=complex) + payoff.eta
    out = payoff.strike ** (1.0 + z) / (z * (z + 1.0))
    return out if out.ndim else complex(out)


class AuxiliaryFunction:
    """psi(t, x): smooth function with the option's boundary asymptotics."""

    payoff: Payoff
    r: float

    @property
    def variant(self) -> str:
        raise NotImplementedError

    def value(self, t: float, x):
        raise NotImplementedError


@dataclass(frozen=True)
class BsPriceAux(AuxiliaryFunction):
    """psi = Black-Scholes price with volatility sigma_bs (closed form)."""

    payoff: Payoff
    r: float
    sigma_bs: float

    def __post_init__(self):
        if not self.sigma_bs > 0:
            raise ValueError(f"sigma_bs must be > 0, got {self.sigma_bs!r}")

    @property
    def variant(self) -> str:
        return "bs_price"

    def value(self, t: float, x):
        x = np.asarray(x, dtype=float)
        k = self.payoff.strike
        if t <= 0.0:
            out = self.payoff.value(x)
            return np.asarray(out, dtype=float)
        s = np.exp(x)
        vol = self.sigma_bs * math.sqrt(t)
        d1 = (x - math.log(k) + (self.r + 0.5 * self.sigma_bs**2) * t) / vol
        d2 = d1 - vol
        disc = math.exp(-self.r * t)
        if self.payoff.is_call:
            out = s * ndtr(d1) - k * disc * ndtr(d2)
        else:
            out = k * disc * ndtr(-d2) - s * ndtr(-d1)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class QhsNormalAux(AuxiliaryFunction):
    """psi = (e^x - K e^{-rt}) Phi(x) for calls (mirrored for puts),
    Phi the N(0, sigma_psi^2) CDF."""

    payoff: Payoff
    r: float
    sigma_psi: float = 0.25

    def __post_init__(self):
        if not self.sigma_psi > 0:
            raise ValueError(f"sigma_psi must be > 0, got {self.sigma_psi!r}")

    @property
    def variant(self) -> str:
        return "qhs_normal"

    def value(self, t: float, x):
        x = np.asarray(x, dtype=float)
        k = self.payoff.strike
        cdf = ndtr(x / self.sigma_psi)
        fwd = np.exp(x) - k * math.exp(-self.r * t)
        out = fwd * cdf if self.payoff.is_call else -fwd * (1.0 - cdf)
        return out if out.ndim else float(out)


def make_aux(variant: str, payoff: Payoff, model: LevyModel,
             sigma_psi: float = 0.25,
             sigma_bs: float | None = None) -> AuxiliaryFunction:
    variant = variant.lower()
    if variant == "qhs_normal":
        return QhsNormalAux(payoff=payoff, r=model.r, sigma_psi=sigma_psi)
    if variant == "bs_price":
        if sigma_bs is None:
            sigma = getattr(model, "sigma", 0.0)
            sigma_bs = sigma if sigma > 0 else 0.15
        return BsPriceAux(payoff=payoff, r=model.r, sigma_bs=sigma_bs)
    raise ValueError(f"unknown psi variant {variant!r}")


def _cutoff(envelope, tol: float, lo: float) -> float:
    """First xi with envelope(xi) * max(xi, 1) <= tol/10, by geometric scan."""
    xi = max(lo, 1.0)
    for _ in range(240):
        if envelope(xi) * max(xi, 1.0) <= 0.1 * tol:
            return xi
        xi *= 1.25
    raise QuadratureError("integrand envelope does not decay below tolerance")


def _growth_on_contour(symbol_diff, eta: float) -> float:
    xi = np.logspace(-2, 5, 40)
    vals = np.abs(symbol_diff(xi - 1j * eta))
    return 1.5 * float(np.max(vals / (1.0 + xi) ** 2)) + 1e-300


def _family_bound(family, eta: float):
    # |phi0_hat(xi + i eta)| <= envelope(xi) * e^{|eta| * support}
    bump = math.exp(abs(eta) * family.support_radius)

    def env(xi):
        return float(family.fourier_envelope(xi)) * bump

    return env


def _shared_grid_projection(gmatrix, ncomp: int, family, eta: float,
                            xi_cut: float, quad: QuadratureConfig,
                            extra_freq: float = 0.0) -> np.ndarray:
    """F_j = e^{-eta x_j}/pi * int_0^xi_cut Re(G(xi) e^{-i xi x_j}) dxi for a
    whole stack of integrands at once.

    gmatrix(pts) returns the complex array (ncomp, npts); the panel grid is
    shared by all components and all nodes and doubled until the worst entry
    converges.  Phase matrices are built once per point block and applied to
    every component by matrix product.
    """
    nodes = family.grid.nodes
    freq = float(np.max(np.abs(nodes))) + family.trig_width + extra_freq
    npanels = max(16, int(math.ceil(xi_cut * freq / math.pi)))
    npanels = min(npanels, 200_000)

    def evaluate(panels: int) -> np.ndarray:
        edges = np.linspace(0.0, xi_cut, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        pts = (mid[:, None] + half * GK_NODES[None, :]).ravel()
        wts = np.tile(GK_WEIGHTS * half, panels)
        out = np.zeros((ncomp, nodes.size))
        # bound the (npts_block x N) phase matrices and the (ncomp x block) slabs
        block = max(256, min(int(4_000_000 // max(nodes.size, 1)),
                             int(16_000_000 // max(ncomp, 1))))
        for s in range(0, pts.size, block):
            p = pts[s:s + block]
            g = np.asarray(gmatrix(p)) * wts[s:s + block]
            # matmul on the strided .real/.imag views falls off the BLAS path
            gre = np.ascontiguousarray(g.real)
            gim = np.ascontiguousarray(g.imag)
            phase = p[:, None] * nodes[None, :]
            out += gre @ np.cos(phase) + gim @ np.sin(phase)
        return out / math.pi

    prev = evaluate(npanels)
    for _ in range(quad.max_subdivisions):
        npanels *= 2
        cur = evaluate(npanels)
        worst = float(np.max(np.abs(cur - prev)))
        scale = float(np.max(np.abs(cur)))
        if worst <= max(quad.abs_tol, quad.rel_tol * scale):
            return cur * np.exp(-eta * nodes)[None, :]
        prev = cur
    raise QuadratureError("load-vector quadrature did not converge")


def rhs_qhs(aux: QhsNormalAux, model: LevyModel, family,
            quad: QuadratureConfig | None = None):
    """Time-independent halves (F_a, F_b) of the smoothed-hockey-stick load:
    F(t) = F_a - K e^{-rt} F_b."""
    if not isinstance(aux, QhsNormalAux):
        raise TypeError("rhs_qhs needs the qhs_normal auxiliary function")
    quad = quad or QuadratureConfig()
    eta = aux.payoff.eta
    model.damping_strip().require(eta, "payoff damping")
    sp = aux.sigma_psi
    r = model.r

    def fhat(z):
        return np.exp(-0.5 * sp**2 * z * z)

    def gmatrix(xi):
        z = xi - 1j * eta
        sym = model.symbol(z)
        phi_c = np.conj(family.phi0_hat(xi + 1j * eta))
        ga = (sym + r) * fhat(xi - 1j * (eta + 1.0)) / (1j * xi + eta + 1.0) * phi_c
        gb = sym * fhat(xi - 1j * eta) / (1j * xi + eta) * phi_c
        return np.stack([ga, gb])

    growth = _growth_on_contour(lambda z: model.symbol(z) + r, eta)
    fam_env = _family_bound(family, eta)
    gauss = math.exp(0.5 * sp**2 * (abs(eta) + 1.0) ** 2)

    def env(xi):
        decay = math.exp(-0.5 * sp**2 * xi**2) * gauss
        return growth * (1.0 + xi) ** 2 * decay * fam_env(xi) \
            / max(min(abs(eta), abs(eta + 1.0)), 0.5 * xi)

    xi_cut = _cutoff(env, quad.abs_tol, 1.0)
    rows = _shared_grid_projection(gmatrix, 2, family, eta, xi_cut, quad)
    return rows[0], rows[1]


def qhs_provider(aux: QhsNormalAux, model: LevyModel, family,
                 quad: QuadratureConfig | None = None):
    """Callable t -> F(t) built from the two precomputed integrals."""
    fa, fb = rhs_qhs(aux, model, family, quad)
    k = aux.payoff.strike
    r = model.r

    def provider(t: float) -> np.ndarray:
        return fa - k * math.exp(-r * t) * fb

    return provider


def rhs_bs(aux: BsPriceAux, model: LevyModel, family, t,
           quad: QuadratureConfig | None = None):
    """Load vector(s) for the Black-Scholes auxiliary function at time(s) t.

    The mismatch symbol (A_bs - A) drives the integrand; time does not
    separate, so each requested t costs one pass over the shared grid.
    Returns a vector for scalar t, else an array (len(t), N).
    """
    if not isinstance(aux, BsPriceAux):
        raise TypeError("rhs_bs needs the bs_price auxiliary function")
    quad = quad or QuadratureConfig()
    eta = aux.payoff.eta
    model.damping_strip().require(eta, "payoff damping")
    bs = BlackScholes(sigma=aux.sigma_bs, r=model.r)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("time must be >= 0")

    def gmatrix_for(tbatch: np.ndarray):
        def gmatrix(xi):
            z = xi - 1j * eta
            bs_sym = bs.symbol(z)
            shared = ((bs_sym - model.symbol(z)) * payoff_hat(aux.payoff, xi)
                      * np.conj(family.phi0_hat(xi + 1j * eta)))
            rate = model.r + bs_sym
            return shared[None, :] * np.exp(-tbatch[:, None] * rate[None, :])
        return gmatrix

    growth = _growth_on_contour(
        lambda z: bs.symbol(z) - model.symbol(z), eta)
    fam_env = _family_bound(family, eta)
    k = aux.payoff.strike

    def xi_cut_for(t_min: float) -> float:
        # exp(-t Re A_bs) helps for t > 0; at t = 0 only the payoff transform
        # and the basis decay truncate the integrand
        damp_bs = math.exp(t_min * 0.5 * aux.sigma_bs**2 * eta**2) \
            * math.exp(abs(t_min * eta * (model.r - 0.5 * aux.sigma_bs**2)))

        def env(xi):
            ghat_bound = k ** (1.0 + eta) / max(0.5 * xi * xi,
                                                abs(eta * (eta + 1.0)))
            gauss = math.exp(-t_min * 0.5 * aux.sigma_bs**2 * xi * xi)
            return (growth * (1.0 + xi) ** 2 * ghat_bound * gauss * damp_bs
                    * fam_env(xi))

        return _cutoff(env, quad.abs_tol, 1.0)

    extra = abs(math.log(k)) + float(times.max()) * (abs(model.b) + 1.0)
    order = np.argsort(times)
    rows = np.empty((times.size, family.grid.n))
    for s in range(0, times.size, 64):
        batch_idx = order[s:s + 64]
        batch = times[batch_idx]
        rows[batch_idx] = _shared_grid_projection(
            gmatrix_for(batch), batch.size, family, eta,
            xi_cut_for(float(batch.min())), quad, extra_freq=extra)
    return rows[0] if np.ndim(t) == 0 else rows


def bs_provider(aux: BsPriceAux, model: LevyModel, family, times,
                quad: QuadratureConfig | None = None):
    """Precompute F(t) on the time grid and serve it by lookup."""
    times = np.asarray(times, dtype=float)
    table = rhs_bs(aux, model, family, times, quad)
    index = {round(float(tt), 12): i for i, tt in enumerate(times)}

    def provider(t: float) -> np.ndarray:
        key = round(float(t), 12)
        if key not in index:
            raise KeyError(f"time {t!r} not on the precomputed grid")
        return table[index[key]]

    return provider


def initial_coefficients(payoff: Payoff, aux: AuxiliaryFunction, family,
                         quad: QuadratureConfig | None = None) -> np.ndarray:
    """L2 projection of g_psi = g - psi(0, .) onto the basis: solve M a = b.

    The load entries are adaptive spatial quadratures over each phi_j's
    support with the payoff kink at log K as a panel edge.
    """
    quad = quad or QuadratureConfig()
    grid = family.grid
    kink = math.log(payoff.strike)

    def gpsi(x):
        return payoff.value(x) - aux.value(0.0, x)

    load = np.empty(grid.n)
    radius = family.support_radius
    knots = family.knots()
    for j, xj in enumerate(grid.nodes):
        edges = np.unique(np.clip(np.concatenate([xj + knots, [kink]]),
                                  xj - radius, xj + radius))

        def f(xs):
            return (gpsi(xs) * family.phi0(xs - xj))[:, None]

        val, _ = adaptive_panels(f, edges, quad.abs_tol, rel_tol=quad.rel_tol,
                                 max_depth=quad.max_subdivisions)
        load[j] = val[0]
    mass = family.mass_matrix(quad)
    return scipy.linalg.solve(mass.to_dense(), load, assume_a="pos")

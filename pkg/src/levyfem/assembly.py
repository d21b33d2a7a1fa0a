"""Stiffness-matrix assembly in Fourier space.

The Toeplitz lag c_m = (1/2pi) int S(xi) e^{i xi m h} |phi0_hat(xi)|^2 dxi is
reduced by symbol parity to one semi-infinite real integral per lag,

    c_m = (1/pi) int_0^inf (Re S * cos(m h xi) - Im S * sin(m h xi)) W(xi) dxi,

with W = |phi0_hat|^2, and evaluated either by oscillation-aware adaptive
panel quadrature (reference path) or by one FFT over a compatible frequency
grid (fast path for all lags at once).
"""

from __future__ import annotations

import concurrent.futures
import math
import warnings

import numpy as np
from scipy.special import ndtr

from .models import LevyModel, Merton
from .quadrature import (QuadratureConfig, QuadratureError, adaptive_panels,
                         oscillatory_half_line)
from .toeplitz import ToeplitzMatrix

__all__ = [
    "AssemblyError",
    "auto_xi_max",
    "symbol_lags_quadrature",
    "symbol_lags_fft",
    "fft_sampling",
    "stiffness_symbol",
    "stiffness_fft",
    "stiffness_bs_closed_form",
    "stiffness_direct_merton",
    "distort",
]

_XI_CAP = 5e7  # truncation cap; beyond this the basis decays too slowly


class AssemblyError(RuntimeError):
    """Matrix assembly failed (quadrature breakdown or bad configuration)."""


def _growth_constant(symbol) -> float:
    """Estimate C with |S(xi)| <= C (1+xi)^2 from probes on [1e-2, 1e6]."""
    xi = np.logspace(-2, 6, 60)
    s = np.asarray(symbol(xi))
    if not np.all(np.isfinite(s)):
        raise AssemblyError("symbol returned non-finite values on the real line")
    return 1.5 * float(np.max(np.abs(s) / (1.0 + xi) ** 2)) + 1e-300


def auto_xi_max(symbol, family, abs_tol: float) -> float:
    """Smallest Xi with C (1+Xi)^2 env(Xi)^2 <= abs_tol / (10 Xi).

    env is the family's transform envelope, so the bound dominates the
    integrand tail mass beyond Xi.
    """
    c = _growth_constant(symbol)

    def excess(xi):
        return (c * (1.0 + xi) ** 2 * family.fourier_envelope(xi) ** 2
                - abs_tol / (10.0 * xi))

    lo = 4.0 * math.pi / family.h
    if excess(lo) <= 0:
        return lo
    hi = lo
    while excess(hi) > 0:
        hi *= 2.0
        if hi > _XI_CAP:
            raise AssemblyError(
                f"truncation point exceeds {_XI_CAP:.0e} for family "
                f"'{family.name}' at abs_tol={abs_tol:g}; loosen the tolerance "
                f"or use a faster-decaying basis"
            )
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def symbol_lags_quadrature(symbol, family, quad: QuadratureConfig,
                           lags=None, threads: int = 1) -> np.ndarray:
    """Lag integrals c_m for the requested integer lags (default: all 2N-1).

    Lags m and -m share one two-component integral (cosine and sine parts).
    Returns the values in the order of `lags`; with lags=None, ascending
    order -(N-1) .. N-1.
    """
    n = family.grid.n
    if lags is None:
        lags = np.arange(-(n - 1), n)
    lags = np.asarray(lags, dtype=int)
    h = family.grid.h
    xi_max = quad.xi_max or auto_xi_max(symbol, family, quad.abs_tol)
    groups = sorted(set(abs(int(m)) for m in lags))

    def weight(xi):
        ph = family.phi0_hat(xi)
        return (ph * np.conj(ph)).real

    def one_group(m: int):
        d = m * h

        def f(xi):
            s = np.asarray(symbol(xi))
            w = weight(xi)
            if m == 0:
                return (s.real * w)[:, None]
            return np.stack([s.real * np.cos(d * xi) * w,
                             s.imag * np.sin(d * xi) * w], axis=-1)

        freq = d + family.trig_width
        try:
            val, _ = oscillatory_half_line(
                f, xi_max, freq, quad.abs_tol, rel_tol=quad.rel_tol,
                max_depth=quad.max_subdivisions, ncomp=1 if m == 0 else 2)
        except QuadratureError as exc:
            raise AssemblyError(f"lag {m}: {exc}") from exc
        if m == 0:
            c0 = val[0] / math.pi
            return m, c0, c0
        ic, isin = val / math.pi
        return m, ic - isin, ic + isin  # c_{+m}, c_{-m}

    results = {}
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            for m, cp, cm in pool.map(one_group, groups):
                results[m] = (cp, cm)
    else:
        for g in groups:
            m, cp, cm = one_group(g)
            results[m] = (cp, cm)
    return np.array([results[abs(m)][0 if m >= 0 else 1] for m in lags])


def fft_sampling(family, xi_target: float, samples: int | None = None):
    """FFT grid hitting every lag m*h exactly: Xi = J*pi/h with integer J.

    Returns (J, Xi, samples); auto samples is the next power of two above
    4*(N-1)*J, which keeps the Poisson aliases at least 4*(N-1)*h away.
    """
    h = family.grid.h
    n = family.grid.n
    j = max(1, int(math.ceil(xi_target * h / math.pi - 1e-9)))
    xi = j * math.pi / h
    need = 4 * max(n - 1, 1) * j
    if samples is None:
        samples = 1 << max(12, int(math.ceil(math.log2(need))))
    if samples & (samples - 1) != 0:
        raise AssemblyError(f"samples must be a power of two, got {samples}")
    if 2 * (n - 1) * j >= samples:
        raise AssemblyError(
            f"incompatible FFT sampling: need samples > 2*(N-1)*J = "
            f"{2 * (n - 1) * j}, got {samples}"
        )
    return j, xi, samples


def symbol_lags_fft(symbol, family, samples: int | None = None,
                    xi_max: float | None = None,
                    quad: QuadratureConfig | None = None) -> np.ndarray:
    """All 2N-1 lags from one discrete transform of S(xi) |phi0_hat(xi)|^2.

    The truncation at Xi and the sample count control the accuracy
    (truncation tail and aliasing respectively); the auto rule matches the
    quadrature path's envelope-based Xi.
    """
    quad = quad or QuadratureConfig()
    if xi_max is None:
        xi_target = quad.xi_max or auto_xi_max(symbol, family, quad.abs_tol)
    else:
        xi_target = xi_max
    j, xi, samples = fft_sampling(family, xi_target, samples)
    if xi_max is not None and abs(xi - xi_max) > 1e-6 * xi:
        raise AssemblyError(
            f"xi_max must be an integer multiple of pi/h for the FFT grid "
            f"(got {xi_max:g}, nearest admissible {xi:g})"
        )
    n = family.grid.n
    dxi = 2.0 * xi / samples
    grid = -xi + dxi * np.arange(samples)
    ph = family.phi0_hat(grid)
    f = np.asarray(symbol(grid)) * (ph * np.conj(ph)).real
    big = samples * np.fft.ifft(f)
    m = np.arange(-(n - 1), n)
    idx = (m * j) % samples
    sign = np.where((j * m) % 2 == 0, 1.0, -1.0)
    vals = (dxi / (2.0 * math.pi)) * sign * big[idx]
    return vals.real


def stiffness_symbol(model: LevyModel, family, quad: QuadratureConfig | None = None,
                     threads: int = 1) -> ToeplitzMatrix:
    """Toeplitz stiffness matrix of the effective symbol A(xi) + r by quadrature."""
    quad = quad or QuadratureConfig()
    if family.name == "hat":
        warnings.warn(
            "hat basis: |phi0_hat|^2 decays only like xi^-4, assembly is slow "
            "and practical accuracy is limited; prefer mollified hats or splines",
            stacklevel=2)
    sym = _effective_symbol(model)
    lags = symbol_lags_quadrature(sym, family, quad, threads=threads)
    return ToeplitzMatrix.from_lags(lags)


def stiffness_fft(model: LevyModel, family, samples: int | None = None,
                  xi_max: float | None = None,
                  quad: QuadratureConfig | None = None) -> ToeplitzMatrix:
    """FFT-accelerated stiffness assembly (all lags simultaneously)."""
    sym = _effective_symbol(model)
    lags = symbol_lags_fft(sym, family, samples=samples, xi_max=xi_max, quad=quad)
    return ToeplitzMatrix.from_lags(lags)


def _effective_symbol(model: LevyModel):
    r = model.r

    def sym(xi):
        return model.symbol(np.asarray(xi, dtype=float)) + r

    return sym


def stiffness_bs_closed_form(sigma: float, r: float, grid) -> ToeplitzMatrix:
    """Classic tridiagonal Black-Scholes FEM matrices for the hat basis:
    A = A_drift + A_diffusion + r*M with exact entries."""
    h = grid.h
    n = grid.n
    drift_half = 0.5 * (r - 0.5 * sigma**2)
    diff = 0.5 * sigma**2 / h
    row = np.zeros(n)
    col = np.zeros(n)
    row[0] = col[0] = 2.0 * diff + r * 4.0 * h / 6.0
    if n > 1:
        row[1] = -drift_half - diff + r * h / 6.0   # lag +1 (super-diagonal)
        col[1] = +drift_half - diff + r * h / 6.0   # lag -1 (sub-diagonal)
    return ToeplitzMatrix(row, col)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _piecewise_gauss(fn, edges) -> float:
    """Fixed 12-point Gauss-Legendre on each interval of `edges` (vectorized).

    Exact for the piecewise-polynomial products of the hat/spline shapes and
    near machine precision for the mollified hats on their fine knot grid.
    """
    lo = edges[:-1]
    hi = edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return 0.0
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = fn(pts.ravel()).reshape(pts.shape)
    return float(np.einsum("pq,q,p->", vals, _GL_WEIGHTS, half))


def _merged_edges(parts, lo, hi):
    pts = np.concatenate([p for p in parts] + [[lo, hi]])
    pts = np.unique(np.clip(pts, lo, hi))
    return pts


def stiffness_direct_merton(model: Merton, family,
                            quad: QuadratureConfig | None = None) -> ToeplitzMatrix:
    """Test oracle: assemble a(phi_k, phi_j) + r*M_jk by spatial quadrature.

    Works directly on the integro-differential bilinear form with the Merton
    Levy density materialized and truncation h(y) = y*1_{|y|<=1}: diffusion
    and drift terms, the compensated small-jump term (inner integrals exact
    through the shape's antiderivative), and the large-jump term.  O(N^2)
    quadratures; restricted to N <= 16.
    """
    if not isinstance(model, Merton):
        raise TypeError(f"direct oracle is Merton-only, got {type(model).__name__}")
    n = family.grid.n
    if n > 16:
        raise ValueError(f"direct oracle restricted to N <= 16, got N={n}")
    quad = quad or QuadratureConfig(abs_tol=1e-9, rel_tol=1e-9)
    lam, aj, bj = model.lam, model.alpha, model.beta
    sig2 = model.sigma**2
    nodes = family.grid.nodes
    knots = family.knots()
    radius = family.support_radius

    def dens(y):
        return lam * np.exp(-0.5 * ((y - aj) / bj) ** 2) / (bj * math.sqrt(2 * math.pi))

    # triplet drift for truncation y*1_{|y|<=1}: martingale drift plus the
    # compensator mass lam * E[Y; |Y| <= 1]
    z_lo, z_hi = (-1.0 - aj) / bj, (1.0 - aj) / bj
    pdf = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    m1 = aj * (ndtr(z_hi) - ndtr(z_lo)) - bj * (pdf(z_hi) - pdf(z_lo))
    b_trunc = model.b + lam * m1

    y_hi = max(1.0, aj + 9.0 * bj) + 1e-9
    y_lo = min(-1.0, aj - 9.0 * bj) - 1e-9
    # kinks of the y-integrands: shifted knots of phi_k crossing knots of phi_j
    kink_diffs = np.unique(np.subtract.outer(knots, knots).ravel())

    def pair_value(j: int, k: int) -> float:
        xj, xk = nodes[j], nodes[k]
        x_edges = _merged_edges([xj + knots, xk + knots], xj - radius, xj + radius)

        diffusion = _piecewise_gauss(
            lambda x: family.phi0_deriv(x - xk) * family.phi0_deriv(x - xj), x_edges)
        drift = _piecewise_gauss(
            lambda x: family.phi0_deriv(x - xk) * family.phi0(x - xj), x_edges)
        mass = _piecewise_gauss(
            lambda x: family.phi0(x - xk) * family.phi0(x - xj), x_edges)

        def small_inner(y: float) -> float:
            edges = _merged_edges([xj + knots, xk + knots, xk - y + knots],
                                  xj - radius, xj + radius)
            return _piecewise_gauss(
                lambda x: (family.phi0_antideriv(x + y - xk)
                           - family.phi0_antideriv(x - xk)
                           - y * family.phi0(x - xk)) * family.phi0_deriv(x - xj),
                edges)

        def large_inner(y: float) -> float:
            edges = _merged_edges([xj + knots, xk + knots, xk - y + knots],
                                  xj - radius, xj + radius)
            return _piecewise_gauss(
                lambda x: (family.phi0(x + y - xk) - family.phi0(x - xk))
                * family.phi0(x - xj), edges)

        def f_small(y_flat):
            return np.array([[dens(y) * small_inner(y)] for y in y_flat])

        def f_large(y_flat):
            return np.array([[dens(y) * large_inner(y)] for y in y_flat])

        base = xk - xj + kink_diffs
        small_edges = _merged_edges([base, [0.0]], -1.0, 1.0)
        small, _ = adaptive_panels(f_small, small_edges, quad.abs_tol,
                                   rel_tol=quad.rel_tol,
                                   max_depth=quad.max_subdivisions)
        large = 0.0
        for lo, hi in ((y_lo, -1.0), (1.0, y_hi)):
            ledges = _merged_edges([base], lo, hi)
            val, _ = adaptive_panels(f_large, ledges, quad.abs_tol,
                                     rel_tol=quad.rel_tol,
                                     max_depth=quad.max_subdivisions)
            large += val[0]

        # the compensated small-jump term enters with a plus: integrating
        # -int int phi'' psi by parts in x flips its sign
        return (0.5 * sig2 * diffusion - b_trunc * drift
                + small[0] - large + model.r * mass)

    lag_vals = np.empty(2 * n - 1)
    for m in range(-(n - 1), n):
        j, k = (0, m) if m >= 0 else (-m, 0)
        lag_vals[m + n - 1] = pair_value(j, k)
    return ToeplitzMatrix.from_lags(lag_vals)


def distort(matrix: ToeplitzMatrix, d: int, seed: int) -> ToeplitzMatrix:
    """Add 10^{-(D-1)} * eps_m to lag m, eps_m iid uniform(-1, 1) from `seed`.

    The same seed draws the same eps for every D, so distortions at
    different accuracies differ only by scale.
    """
    if d < 1:
        raise ValueError(f"D must be >= 1, got {d!r}")
    rng = np.random.default_rng(seed)
    eps = rng.uniform(-1.0, 1.0, size=2 * matrix.n - 1)
    return ToeplitzMatrix.from_lags(matrix.lags() + 10.0 ** (-(d - 1)) * eps)

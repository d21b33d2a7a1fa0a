"""Equidistant grids and translation-invariant basis families.

Every family consists of shifts phi_j(x) = phi0(x - x_j) of one reference
shape, so a single closed-form Fourier transform phi0_hat drives all
Fourier-space assembly.  Three shapes are provided: the classic FEM hat,
the hat mollified by a Gaussian (tunable width eps = epsilon_h * h), and
the Irwin-Hall cubic spline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .quadrature import QuadratureConfig
from .toeplitz import ToeplitzMatrix

__all__ = [
    "Grid",
    "BasisFamily",
    "HatBasis",
    "MollifiedHatBasis",
    "SplineBasis",
    "make_family",
    "synthesize",
]

_SMALL_U = 1e-4  # switch to the Taylor series of the transform below this |xi*h|


@dataclass(frozen=True)
class Grid:
    """n equidistant nodes x0, x0+h, ..., strictly inside [a, b]."""

    a: float
    b: float
    n: int
    h: float
    x0: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a!r}, b={self.b!r}")
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got n={self.n!r}")

    @classmethod
    def for_hats(cls, a: float, b: float, n: int) -> "Grid":
        """n interior nodes, h = (b-a)/(n+1), x_j = a + j*h for j = 1..n."""
        h = (b - a) / (n + 1)
        return cls(a=a, b=b, n=n, h=h, x0=a + h)

    @classmethod
    def for_splines(cls, a: float, b: float, n: int) -> "Grid":
        """n spline nodes with the three boundary splines per side omitted:
        h = (b-a)/(n+3), x_j = a + (j+1)*h for j = 1..n."""
        h = (b - a) / (n + 3)
        return cls(a=a, b=b, n=n, h=h, x0=a + 2 * h)

    @property
    def nodes(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    def align_to(self, value: float) -> "Grid":
        """Shift the whole grid so that `value` coincides with a node."""
        j = round((value - self.x0) / self.h)
        j = min(max(j, 0), self.n - 1)
        shift = value - (self.x0 + j * self.h)
        return Grid(a=self.a + shift, b=self.b + shift, n=self.n,
                    h=self.h, x0=self.x0 + shift)


def _as_result(x_in, out):
    if np.ndim(x_in) == 0:
        return out[()] if isinstance(out, np.ndarray) else out
    return out


class BasisFamily:
    """Reference shape, its derivative/antiderivative, and its transform."""

    grid: Grid
    name: str

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def support_radius(self) -> float:
        """Half width of the (effective) support of phi0."""
        raise NotImplementedError

    @property
    def trig_width(self) -> float:
        """Fastest trigonometric frequency present in |phi0_hat|^2."""
        raise NotImplementedError

    def phi0(self, x):
        raise NotImplementedError

    def phi0_deriv(self, x):
        raise NotImplementedError

    def phi0_antideriv(self, x):
        """Integral of phi0 from -inf to x."""
        raise NotImplementedError

    def phi0_hat(self, z):
        """Closed-form Fourier transform int e^{izx} phi0(x) dx, entire in z."""
        raise NotImplementedError

    def fourier_envelope(self, xi):
        """Monotone bound on |phi0_hat(xi)| for real xi >= 0."""
        raise NotImplementedError

    def knots(self) -> np.ndarray:
        """Breakpoints splitting the support of phi0 into smooth pieces."""
        raise NotImplementedError

    def basis_hat(self, j: int, z):
        """Transform of phi_j: e^{i z x_j} phi0_hat(z)."""
        return np.exp(1j * np.asarray(z, dtype=complex) * self.grid.nodes[j]) \
            * self.phi0_hat(z)

    def mass_matrix(self, quad: QuadratureConfig | None = None,
                    method: str = "auto") -> ToeplitzMatrix:
        """Gram matrix of the basis, a symmetric Toeplitz matrix.

        Hats have the exact closed form (h/6)*tridiag(1,4,1).  Spline and
        mollified-hat entries come from the symbol-method engine with
        constant symbol 1; spline lags beyond the support width are exact
        zeros.  `method` picks "quadrature" or "fft" ("auto": quadrature up
        to N=257, FFT beyond).
        """
        from .assembly import symbol_lags_fft, symbol_lags_quadrature

        quad = quad or QuadratureConfig()
        n = self.grid.n
        one = lambda xi: np.ones_like(np.asarray(xi, dtype=float), dtype=complex)
        if isinstance(self, HatBasis):
            row = np.zeros(n)
            row[0] = 4 * self.h / 6
            if n > 1:
                row[1] = self.h / 6
            return ToeplitzMatrix(row, row.copy())
        if isinstance(self, SplineBasis):
            width = 4  # entries vanish for |l-k| >= 4: disjoint supports
            m = min(width, n)
            half = symbol_lags_quadrature(one, self, quad, lags=np.arange(m))
            row = np.zeros(n)
            row[:m] = half
            return ToeplitzMatrix(row, row.copy())
        if method == "auto":
            method = "quadrature" if n <= 257 else "fft"
        if method == "fft":
            lags = symbol_lags_fft(one, self, quad=quad)
            mat = ToeplitzMatrix.from_lags(lags)
            # symmetrize away the odd-part quadrature noise of the real transform
            row = 0.5 * (mat.first_row + mat.first_col)
            return ToeplitzMatrix(row, row.copy())
        half = symbol_lags_quadrature(one, self, quad, lags=np.arange(n))
        return ToeplitzMatrix(half, half.copy())


@dataclass(frozen=True)
class HatBasis(BasisFamily):
    """Piecewise-linear hat, peak 1 at 0, support [-h, h]."""

    grid: Grid
    name: str = field(default="hat", init=False)

    @property
    def support_radius(self) -> float:
        return self.h

    @property
    def trig_width(self) -> float:
        return 2.0 * self.h

    def phi0(self, x):
        u = np.abs(np.asarray(x, dtype=float)) / self.h
        return _as_result(x, np.maximum(0.0, 1.0 - u))

    def phi0_deriv(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where((xa > -self.h) & (xa < 0), 1.0 / self.h, 0.0)
        out = np.where((xa >= 0) & (xa < self.h), -1.0 / self.h, out)
        return _as_result(x, out)

    def phi0_antideriv(self, x):
        h = self.h
        xa = np.clip(np.asarray(x, dtype=float), -h, h)
        out = np.where(xa < 0, (xa + h) ** 2 / (2 * h), h - (h - xa) ** 2 / (2 * h))
        return _as_result(x, out)

    def phi0_hat(self, z):
        z = np.asarray(z, dtype=complex)
        u = z * self.h
        small = np.abs(u) < _SMALL_U
        usafe = np.where(small, 1.0, u)
        # 2(1-cos u)/u^2 written as (sin(u/2)/(u/2))^2: no cancellation
        ratio = np.sin(0.5 * usafe) / (0.5 * usafe)
        series = 1.0 - u**2 / 12.0 + u**4 / 360.0 - u**6 / 20160.0
        out = self.h * np.where(small, series, ratio * ratio)
        return out[()] if out.ndim == 0 else out

    def fourier_envelope(self, xi):
        u = np.asarray(xi, dtype=float) * self.h
        with np.errstate(divide="ignore"):
            bound = np.where(u > 0, 4.0 / np.maximum(u, 1e-300) ** 2, 1.0)
        return self.h * np.minimum(1.0, bound)

    def knots(self) -> np.ndarray:
        return np.array([-self.h, 0.0, self.h])


@dataclass(frozen=True)
class MollifiedHatBasis(BasisFamily):
    """Hat convolved with a Gaussian of width eps = epsilon_h * h.

    Spatial values use the closed form of the convolution, a second
    difference of R(u) = u*Phi(u/eps) + eps^2 * pdf_eps(u).
    """

    grid: Grid
    epsilon_h: float = 0.3
    name: str = field(default="mollified_hat", init=False)

    def __post_init__(self):
        if not self.epsilon_h > 0:
            raise ValueError(f"epsilon_h must be > 0, got {self.epsilon_h!r}")

    @property
    def eps(self) -> float:
        return self.epsilon_h * self.h

    @property
    def support_radius(self) -> float:
        return self.h + 8.0 * self.eps

    @property
    def trig_width(self) -> float:
        return 2.0 * self.h

    def _pdf(self, u):
        e = self.eps
        return np.exp(-0.5 * (u / e) ** 2) / (e * math.sqrt(2 * math.pi))

    def _ramp_smooth(self, u):
        # convolution of max(x, 0) with the Gaussian
        e = self.eps
        return u * ndtr(u / e) + e**2 * self._pdf(u)

    def phi0(self, x):
        xa = np.asarray(x, dtype=float)
        h = self.h
        out = (self._ramp_smooth(xa + h) - 2 * self._ramp_smooth(xa)
               + self._ramp_smooth(xa - h)) / h
        return _as_result(x, out)

    def phi0_deriv(self, x):
        xa = np.asarray(x, dtype=float)
        h, e = self.h, self.eps
        out = (ndtr((xa + h) / e) - 2 * ndtr(xa / e) + ndtr((xa - h) / e)) / h
        return _as_result(x, out)

    def phi0_antideriv(self, x):
        xa = np.asarray(x, dtype=float)
        h, e = self.h, self.eps

        def r2(u):
            return 0.5 * ((u**2 + e**2) * ndtr(u / e) + e**2 * u * self._pdf(u))

        out = (r2(xa + h) - 2 * r2(xa) + r2(xa - h)) / h
        return _as_result(x, out)

    def phi0_hat(self, z):
        z = np.asarray(z, dtype=complex)
        hat = HatBasis(self.grid).phi0_hat(z)
        out = hat * np.exp(-0.5 * self.eps**2 * z * z)
        return out[()] if isinstance(out, np.ndarray) and out.ndim == 0 else out

    def fourier_envelope(self, xi):
        xi = np.asarray(xi, dtype=float)
        hat = HatBasis(self.grid).fourier_envelope(xi)
        return hat * np.exp(-0.5 * self.eps**2 * xi**2)

    def knots(self) -> np.ndarray:
        # smooth everywhere; panels on the eps scale keep fixed-order rules exact
        r = self.support_radius
        step = min(self.eps, self.h / 2)
        inner = np.arange(-r, r + step / 2, step)
        return np.unique(np.concatenate([inner, [-self.h, 0.0, self.h, -r, r]]))


@dataclass(frozen=True)
class SplineBasis(BasisFamily):
    """Irwin-Hall cubic spline scaled to phi0(x) = s(x/h), support [-2h, 2h].

    s(u) = ((u+2)^3, 3|u|^3 - 6u^2 + 4, (2-u)^3)/4 on the pieces
    [-2,-1), [-1,1), [1,2]; peak s(0) = 1.
    """

    grid: Grid
    name: str = field(default="spline", init=False)

    @property
    def support_radius(self) -> float:
        return 2.0 * self.h

    @property
    def trig_width(self) -> float:
        return 4.0 * self.h

    @staticmethod
    def _shape(u):
        au = np.abs(u)
        out = np.zeros_like(u)
        mid = au < 1
        out[mid] = (3 * au[mid] ** 3 - 6 * u[mid] ** 2 + 4) / 4
        wing = (au >= 1) & (au <= 2)
        out[wing] = (2 - au[wing]) ** 3 / 4
        return out

    @staticmethod
    def _shape_deriv(u):
        au = np.abs(u)
        out = np.zeros_like(u)
        mid = au < 1
        out[mid] = (9 * u[mid] * au[mid] - 12 * u[mid]) / 4
        wing = (au >= 1) & (au <= 2)
        out[wing] = -0.75 * np.sign(u[wing]) * (2 - au[wing]) ** 2
        return out

    @staticmethod
    def _shape_antideriv(u):
        u = np.clip(u, -2.0, 2.0)
        out = np.empty_like(u)
        left = u < -1
        out[left] = (u[left] + 2) ** 4 / 16
        mid = (u >= -1) & (u < 1)
        um = u[mid]
        out[mid] = (3 * um**3 * np.abs(um) - 8 * um**3 + 16 * um) / 16 + 0.75
        right = u >= 1
        out[right] = 1.5 - (2 - u[right]) ** 4 / 16
        return out

    def phi0(self, x):
        u = np.asarray(x, dtype=float) / self.h
        return _as_result(x, self._shape(np.atleast_1d(u)).reshape(np.shape(u)))

    def phi0_deriv(self, x):
        u = np.asarray(x, dtype=float) / self.h
        val = self._shape_deriv(np.atleast_1d(u)).reshape(np.shape(u)) / self.h
        return _as_result(x, val)

    def phi0_antideriv(self, x):
        u = np.asarray(x, dtype=float) / self.h
        val = self._shape_antideriv(np.atleast_1d(u)).reshape(np.shape(u)) * self.h
        return _as_result(x, val)

    def phi0_hat(self, z):
        z = np.asarray(z, dtype=complex)
        u = z * self.h
        small = np.abs(u) < _SMALL_U
        usafe = np.where(small, 1.0, u)
        # 3(cos 2u - 4 cos u + 3)/u^4 = 24 sin^4(u/2)/u^4
        ratio = np.sin(0.5 * usafe) / usafe
        series = 1.5 - u**2 / 4.0 + 3.0 * u**4 / 160.0 - 17.0 * u**6 / 20160.0
        out = self.h * np.where(small, series, 24.0 * ratio**4)
        return out[()] if out.ndim == 0 else out

    def fourier_envelope(self, xi):
        u = np.asarray(xi, dtype=float) * self.h
        with np.errstate(divide="ignore"):
            bound = np.where(u > 0, 24.0 / np.maximum(u, 1e-300) ** 4, 1.5)
        return self.h * np.minimum(1.5, bound)

    def knots(self) -> np.ndarray:
        h = self.h
        return np.array([-2 * h, -h, 0.0, h, 2 * h])


def make_family(name: str, grid_a: float, grid_b: float, n: int,
                epsilon_h: float = 0.3,
                align_strike: float | None = None) -> BasisFamily:
    """Build a basis family with its convention-matching grid."""
    name = name.lower()
    if name == "spline":
        grid = Grid.for_splines(grid_a, grid_b, n)
    elif name in ("hat", "mollified_hat"):
        grid = Grid.for_hats(grid_a, grid_b, n)
    else:
        raise ValueError(f"unknown basis family {name!r}")
    if align_strike is not None:
        grid = grid.align_to(align_strike)
    if name == "hat":
        return HatBasis(grid)
    if name == "mollified_hat":
        return MollifiedHatBasis(grid, epsilon_h=epsilon_h)
    return SplineBasis(grid)


def nodal_synthesis(family: BasisFamily, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate the basis combination at the family's own nodes.

    Node differences are exact multiples of h, so the evaluation is a
    shift-and-add with the fixed stencil phi0(d*h); accepts a coefficient
    matrix (rows = time nodes) and returns the same shape.
    """
    squeeze = np.asarray(coeffs).ndim == 1
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    n = family.grid.n
    if coeffs.shape[1] != n:
        raise ValueError(f"expected {n} coefficients per row, got {coeffs.shape}")
    band = int(math.ceil(family.support_radius / family.grid.h))
    out = np.zeros_like(coeffs)
    for d in range(-band, band + 1):
        w = float(family.phi0(d * family.grid.h))
        if w == 0.0:
            continue
        if d > 0:
            out[:, d:] += w * coeffs[:, :n - d]
        elif d < 0:
            out[:, :d] += w * coeffs[:, -d:]
        else:
            out += w * coeffs
    return out[0] if squeeze else out


def synthesize(family: BasisFamily, coeffs: np.ndarray, x) -> np.ndarray:
    """Evaluate sum_j coeffs_j * phi0(x - x_j) at the points x."""
    coeffs = np.asarray(coeffs, dtype=float)
    grid = family.grid
    if coeffs.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} coefficients, got {coeffs.shape}")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(xa)
    band = int(math.ceil(family.support_radius / grid.h)) + 1
    center = np.rint((xa - grid.x0) / grid.h).astype(int)
    for d in range(-band, band + 1):
        j = center + d
        ok = (j >= 0) & (j < grid.n)
        if not ok.any():
            continue
        out[ok] += coeffs[j[ok]] * family.phi0(xa[ok] - (grid.x0 + j[ok] * grid.h))
    return _as_result(x, out)

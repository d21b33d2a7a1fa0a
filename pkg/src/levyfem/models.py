"""Levy model families and their symbols.

Each model is determined by its symbol A, the closed-form Fourier multiplier
of the (negative) generator of the log-price process.  The fixed convention
throughout the package is

    E exp(i*u*L_t) = exp(-t * A(-u)),

so the discounted-martingale condition E[exp(L_t)] = exp(r*t) reads
A(i) = -r and pins the drift.  Real-argument evaluation satisfies
A(-xi) = conj(A(xi)); complex arguments z = xi - i*eta are admissible for
damping weights eta inside the model's strip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

__all__ = [
    "StripError",
    "DampingStrip",
    "LevyModel",
    "BlackScholes",
    "Merton",
    "CGMY",
    "NIG",
]


class StripError(ValueError):
    """Raised when a frequency argument leaves the admissible damping strip."""


@dataclass(frozen=True)
class DampingStrip:
    """Open interval of damping weights eta (weight exp(eta*x)).

    The symbol is evaluated at z = xi - i*eta.  eta = 0 (no damping) is
    always admissible, even when a strip edge sits at 0.
    """

    lo: float
    hi: float

    def contains(self, eta: float) -> bool:
        return eta == 0.0 or (self.lo < eta < self.hi)

    def require(self, eta: float, what: str = "damping parameter") -> None:
        if not self.contains(eta):
            raise StripError(
                f"{what} eta={eta:g} outside admissible strip "
                f"({self.lo:g}, {self.hi:g})"
            )


def _require_positive(name: str, value: float) -> None:
    if not value > 0.0:
        raise ValueError(f"{name} must be > 0, got {value!r}")


def _require_nonnegative(name: str, value: float) -> None:
    if not value >= 0.0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")


class LevyModel:
    """Common behaviour of the four model families.

    Subclasses provide the pure Levy symbol without drift via `_jump_diffusion`
    and the martingale drift correction; `symbol` assembles A(z) = i*z*b + rest
    and guards the strip.
    """

    r: float
    drift_offset: float

    @property
    def name(self) -> str:
        return type(self).__name__

    def damping_strip(self) -> DampingStrip:
        raise NotImplementedError

    def martingale_drift(self) -> float:
        """Drift b making the discounted asset a martingale (A(i) = -r)."""
        raise NotImplementedError

    @property
    def b(self) -> float:
        return self.martingale_drift() + self.drift_offset

    def _symbol_no_drift(self, z):
        """Diffusion plus jump part of A at z; vanishes at z = 0."""
        raise NotImplementedError

    def symbol(self, z):
        """Evaluate A(z) for scalar or array z = xi - i*eta inside the strip."""
        z = np.asarray(z, dtype=complex)
        eta = -z.imag
        strip = self.damping_strip()
        lo = float(np.min(eta))
        hi = float(np.max(eta))
        if not (strip.contains(lo) and strip.contains(hi)):
            raise StripError(
                f"{self.name} symbol evaluated at Im(z) in [{-hi:g}, {-lo:g}]: "
                f"eta must lie in the strip ({strip.lo:g}, {strip.hi:g})"
            )
        out = 1j * z * self.b + self._symbol_no_drift(z)
        if out.ndim == 0:
            return complex(out)
        return out

    def characteristic_function(self, t: float, u):
        """E exp(i*u*L_t) = exp(-t*A(-u)) for real frequencies u and t >= 0."""
        if t < 0:
            raise ValueError(f"time must be >= 0, got {t!r}")
        u = np.asarray(u, dtype=float)
        out = np.exp(-t * self.symbol(-u))
        if out.ndim == 0:
            return complex(out)
        return out


@dataclass(frozen=True)
class BlackScholes(LevyModel):
    """Geometric Brownian motion: A(z) = i*z*b + sigma^2 z^2 / 2."""

    sigma: float
    r: float = 0.0
    drift_offset: float = 0.0

    def __post_init__(self):
        _require_positive("sigma", self.sigma)
        _require_nonnegative("r", self.r)

    def damping_strip(self) -> DampingStrip:
        return DampingStrip(-math.inf, math.inf)

    def martingale_drift(self) -> float:
        return self.r - 0.5 * self.sigma**2

    def _symbol_no_drift(self, z):
        return 0.5 * self.sigma**2 * z * z


@dataclass(frozen=True)
class Merton(LevyModel):
    """Jump diffusion with Gaussian jumps N(alpha, beta^2) at intensity lam.

    A(z) = sigma^2 z^2/2 + i z b - lam*(exp(-i alpha z - beta^2 z^2/2) - 1)
    """

    sigma: float
    lam: float
    alpha: float
    beta: float
    r: float = 0.0
    drift_offset: float = 0.0

    def __post_init__(self):
        _require_positive("sigma", self.sigma)
        _require_positive("lam", self.lam)
        _require_positive("beta", self.beta)
        _require_nonnegative("r", self.r)

    def damping_strip(self) -> DampingStrip:
        return DampingStrip(-math.inf, math.inf)

    def martingale_drift(self) -> float:
        kappa = math.exp(self.alpha + 0.5 * self.beta**2) - 1.0
        return self.r - 0.5 * self.sigma**2 - self.lam * kappa

    def _symbol_no_drift(self, z):
        jump = np.exp(-1j * self.alpha * z - 0.5 * self.beta**2 * z * z) - 1.0
        return 0.5 * self.sigma**2 * z * z - self.lam * jump


@dataclass(frozen=True)
class CGMY(LevyModel):
    """Tempered stable (CGMY) model, jump activity index Y in (1, 2).

    A(z) = i z b + sigma^2 z^2/2
           - C*Gamma(-Y)*[(M+iz)^Y - M^Y + (G-iz)^Y - G^Y]

    Complex powers use the principal branch; the strip (-M, G) keeps both
    power bases in the right half plane.
    """

    C: float
    G: float
    M: float
    Y: float
    sigma: float = 0.0
    r: float = 0.0
    drift_offset: float = 0.0

    def __post_init__(self):
        _require_positive("C", self.C)
        _require_nonnegative("G", self.G)
        _require_nonnegative("M", self.M)
        if not 1.0 < self.Y < 2.0:
            raise ValueError(f"Y must lie in (1, 2), got {self.Y!r}")
        _require_nonnegative("sigma", self.sigma)
        _require_nonnegative("r", self.r)

    def damping_strip(self) -> DampingStrip:
        return DampingStrip(-self.M, self.G)

    def martingale_drift(self) -> float:
        if not self.M > 1.0:
            raise StripError(
                f"CGMY martingale drift requires M > 1 "
                f"(exponential moment of order 1), got M={self.M:g}"
            )
        cg = self.C * _gamma(-self.Y)
        jump = (
            (self.M - 1.0) ** self.Y
            - self.M**self.Y
            + (self.G + 1.0) ** self.Y
            - self.G**self.Y
        )
        return self.r - 0.5 * self.sigma**2 - cg * jump

    def _symbol_no_drift(self, z):
        cg = self.C * _gamma(-self.Y)
        jump = (
            (self.M + 1j * z) ** self.Y
            - self.M**self.Y
            + (self.G - 1j * z) ** self.Y
            - self.G**self.Y
        )
        return 0.5 * self.sigma**2 * z * z - cg * jump


@dataclass(frozen=True)
class NIG(LevyModel):
    """Normal inverse Gaussian model.

    A(z) = sigma^2 z^2/2 + i z b
           - delta*(sqrt(alpha^2 - beta^2) - sqrt(alpha^2 - (beta - iz)^2))
    """

    alpha: float
    beta: float
    delta: float
    sigma: float = 0.0
    r: float = 0.0
    drift_offset: float = 0.0

    def __post_init__(self):
        _require_positive("alpha", self.alpha)
        if not self.alpha**2 > self.beta**2:
            raise ValueError(
                f"NIG requires alpha^2 > beta^2, got alpha={self.alpha!r}, "
                f"beta={self.beta!r}"
            )
        _require_positive("delta", self.delta)
        _require_nonnegative("sigma", self.sigma)
        _require_nonnegative("r", self.r)

    def damping_strip(self) -> DampingStrip:
        return DampingStrip(self.beta - self.alpha, self.beta + self.alpha)

    def martingale_drift(self) -> float:
        if not self.alpha**2 > (self.beta + 1.0) ** 2:
            raise StripError(
                f"NIG martingale drift requires alpha^2 > (beta+1)^2, got "
                f"alpha={self.alpha:g}, beta={self.beta:g}"
            )
        root0 = math.sqrt(self.alpha**2 - self.beta**2)
        root1 = math.sqrt(self.alpha**2 - (self.beta + 1.0) ** 2)
        return self.r - 0.5 * self.sigma**2 - self.delta * (root0 - root1)

    def _symbol_no_drift(self, z):
        root0 = math.sqrt(self.alpha**2 - self.beta**2)
        rootz = np.sqrt(self.alpha**2 - (self.beta - 1j * z) ** 2)
        return 0.5 * self.sigma**2 * z * z - self.delta * (root0 - rootz)

"""Theta scheme on the localized Galerkin system and surface reconstruction.

One step solves

    (M + dt*theta*A) V^{k+1} = (M - dt*(1-theta)*A) V^k + dt*(theta*F(t_{k+1})
                                                              + (1-theta)*F(t_k)),

with the left-hand factorization reused across all steps.  The price surface
is recovered by evaluating the coefficient combination and adding psi
pointwise (exact for non-interpolatory bases).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import BasisFamily, synthesize
from .localization import AuxiliaryFunction
from .toeplitz import ToeplitzMatrix

__all__ = ["ThetaConfig", "PriceSurface", "run_theta", "evaluate_surface"]


@dataclass(frozen=True)
class ThetaConfig:
    horizon: float
    steps: int
    theta: float = 0.5

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon!r}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


def run_theta(mass: ToeplitzMatrix, stiffness: ToeplitzMatrix, rhs,
              alpha: np.ndarray, cfg: ThetaConfig) -> np.ndarray:
    """March the coefficient vector through all time nodes.

    `rhs` may be None (homogeneous), a callable t -> vector, or a
    precomputed array of shape (steps+1, N).  Returns the trajectory
    (steps+1, N) with V^0 = alpha.
    """
    n = mass.n
    if stiffness.n != n:
        raise ValueError("mass/stiffness dimension mismatch")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (n,):
        raise ValueError(f"initial coefficients must have shape ({n},)")
    dt = cfg.dt
    theta = cfg.theta
    times = cfg.times
    if rhs is None:
        fvals = np.zeros((cfg.steps + 1, n))
    elif callable(rhs):
        fvals = np.vstack([np.asarray(rhs(t), dtype=float) for t in times])
    else:
        fvals = np.asarray(rhs, dtype=float)
        if fvals.shape != (cfg.steps + 1, n):
            raise ValueError(
                f"rhs table must have shape ({cfg.steps + 1}, {n}), got {fvals.shape}")
    m = mass.to_dense()
    a = stiffness.to_dense()
    lhs = m + dt * theta * a
    try:
        lu = scipy.linalg.lu_factor(lhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise RuntimeError(f"singular theta-scheme system: {exc}") from exc
    explicit = m - dt * (1.0 - theta) * a
    traj = np.empty((cfg.steps + 1, n))
    traj[0] = alpha
    for k in range(cfg.steps):
        load = dt * (theta * fvals[k + 1] + (1.0 - theta) * fvals[k])
        traj[k + 1] = scipy.linalg.lu_solve(lu, explicit @ traj[k] + load,
                                            check_finite=False)
    return traj


@dataclass(frozen=True)
class PriceSurface:
    """Option values on a time-by-space grid, plus run metadata."""

    times: np.ndarray
    points: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        points = np.asarray(self.points, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (times.size, points.size):
            raise ValueError(
                f"values shape {values.shape} inconsistent with "
                f"{times.size} times x {points.size} points")
        if not np.all(np.isfinite(values)):
            raise ValueError("surface contains non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("t," + ",".join(f"{x:.17g}" for x in self.points) + "\n")
            for t, row in zip(self.times, self.values):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "PriceSurface":
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip().split(",")
        points = np.array([float(v) for v in header[1:]])
        data = np.atleast_2d(data)
        return cls(times=data[:, 0], points=points, values=data[:, 1:])


def evaluate_surface(trajectory: np.ndarray, family: BasisFamily,
                     aux: AuxiliaryFunction, points, times,
                     metadata: dict | None = None) -> PriceSurface:
    """V(t_k, x) = sum_j V^k_j phi_j(x) + psi(t_k, x) on the given points."""
    points = np.asarray(points, dtype=float)
    grid = family.grid
    if np.any(points < grid.a - 1e-12) or np.any(points > grid.b + 1e-12):
        raise ValueError(
            f"evaluation points must lie in [{grid.a:g}, {grid.b:g}]")
    trajectory = np.asarray(trajectory, dtype=float)
    times = np.asarray(times, dtype=float)
    values = np.empty((times.size, points.size))
    for i, t in enumerate(times):
        values[i] = synthesize(family, trajectory[i], points) \
            + aux.value(float(t), points)
    return PriceSurface(times=times, points=points, values=values,
                        metadata=metadata or {})

"""Dense Toeplitz matrices stored by first row and first column.

Entry (k, l) equals c_{l-k}: the first row holds c_0 .. c_{N-1} (lags of the
trial node relative to the test node), the first column c_0 .. c_{-(N-1)}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = ["ToeplitzMatrix"]


@dataclass(frozen=True)
class ToeplitzMatrix:
    first_row: np.ndarray
    first_col: np.ndarray

    def __post_init__(self):
        row = np.array(self.first_row, dtype=float)
        col = np.array(self.first_col, dtype=float)
        if row.ndim != 1 or row.shape != col.shape:
            raise ValueError("first_row and first_col must be 1-d of equal length")
        if row.size == 0:
            raise ValueError("empty matrix")
        if row[0] != col[0]:
            raise ValueError(
                f"corner mismatch: first_row[0]={row[0]!r} != first_col[0]={col[0]!r}"
            )
        row.flags.writeable = False
        col.flags.writeable = False
        object.__setattr__(self, "first_row", row)
        object.__setattr__(self, "first_col", col)

    @classmethod
    def from_lags(cls, lags: np.ndarray) -> "ToeplitzMatrix":
        """Build from the 2N-1 values c_{-(N-1)} .. c_{N-1} in ascending lag order."""
        lags = np.asarray(lags, dtype=float)
        if lags.size % 2 != 1:
            raise ValueError("lag array must have odd length 2N-1")
        n = (lags.size + 1) // 2
        return cls(first_row=lags[n - 1:], first_col=lags[n - 1::-1])

    @property
    def n(self) -> int:
        return self.first_row.size

    def lag(self, m: int) -> float:
        """c_m, the common value of all entries (k, l) with l - k = m."""
        if abs(m) >= self.n:
            raise IndexError(f"lag {m} out of range for N={self.n}")
        return float(self.first_row[m]) if m >= 0 else float(self.first_col[-m])

    def lags(self) -> np.ndarray:
        """All lag values c_{-(N-1)} .. c_{N-1} in ascending order."""
        return np.concatenate([self.first_col[::-1], self.first_row[1:]])

    def entry(self, k: int, l: int) -> float:
        return self.lag(l - k)

    def to_dense(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self.first_col, self.first_row)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return scipy.linalg.matmul_toeplitz((self.first_col, self.first_row), x)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.first_row - self.first_col)) <= tol)

    def __add__(self, other: "ToeplitzMatrix") -> "ToeplitzMatrix":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return ToeplitzMatrix(self.first_row + other.first_row,
                              self.first_col + other.first_col)

    def scaled(self, factor: float) -> "ToeplitzMatrix":
        return ToeplitzMatrix(self.first_row * factor, self.first_col * factor)

    def max_abs_diff(self, other: "ToeplitzMatrix") -> float:
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return float(max(np.max(np.abs(self.first_row - other.first_row)),
                         np.max(np.abs(self.first_col - other.first_col))))

    def to_csv(self, path) -> None:
        """First row, then first column, full double precision."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write(",".join(f"c{i}" for i in range(self.n)) + "\n")
            for vec in (self.first_row, self.first_col):
                fh.write(",".join(f"{v:.17g}" for v in vec) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ToeplitzMatrix":
        with open(path, "r", encoding="ascii") as fh:
            fh.readline()
            row = np.array([float(v) for v in fh.readline().split(",")])
            col = np.array([float(v) for v in fh.readline().split(",")])
        return cls(row, col)

"""Real cosine/sine basis of T(R(s)).

R(s) is symmetric under k -> -k, so with H the frequencies whose first
nonzero entry is positive, {1} u {cos(k,x), sin(k,x) : k in H} is a real basis
of dimension 1 + 2|H| = |R(s)|. Coefficient vectors are laid out as
[constant, cos block over H, sin block over H].
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from unirecover.torus import ShapeLike, ShapeVector, as_shape, enumerate_rectangle


def positive_half(frequencies: np.ndarray) -> np.ndarray:
    """Rows whose first nonzero entry is positive"""
    first = np.zeros(frequencies.shape[0], dtype=np.int64)
    for column in frequencies.T[::-1]:
        first = np.where(column != 0, column, first)
    return frequencies[first > 0]


@dataclass(frozen=True, eq=False)
class RealBasis:
    shape: ShapeVector
    half: np.ndarray = field(repr=False)

    @classmethod
    def for_shape(cls, s: ShapeLike, cap: Optional[int] = None) -> "RealBasis":
        s = as_shape(s)
        return cls(shape=s, half=positive_half(enumerate_rectangle(s, cap)))

    @property
    def dim(self) -> int:
        return 1 + 2 * self.half.shape[0]

    def matrix(self, points: np.ndarray) -> np.ndarray:
        """(p, dim) design matrix at points of shape (p, d)"""
        points = np.asarray(points, dtype=np.float64)
        phase = points @ self.half.T.astype(np.float64)
        return np.hstack([np.ones((points.shape[0], 1)), np.cos(phase), np.sin(phase)])

    def evaluate(self, coefficients: np.ndarray, points: np.ndarray, chunk: int = 65536) -> np.ndarray:
        """Polynomial values for one coefficient vector or a (dim, q) stack"""
        points = np.asarray(points, dtype=np.float64)
        parts = [
            self.matrix(points[i : i + chunk]) @ coefficients
            for i in range(0, points.shape[0], chunk)
        ]
        if not parts:
            return np.empty((0,) + np.shape(coefficients)[1:])
        return np.concatenate(parts, axis=0)

    def evaluate_grid(self, coefficients: np.ndarray, resolution: int) -> np.ndarray:
        """Values on the uniform grid {2*pi*i/M}^d, shape (M,)*d or (M,)*d + (q,)"""
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.shape[0] != self.dim:
            raise ValueError(f"Expected {self.dim} coefficients, got {coefficients.shape[0]}")
        H = self.half.shape[0]
        return synthesize_on_grid(
            self.half,
            coefficients[0],
            coefficients[1 : 1 + H],
            coefficients[1 + H :],
            resolution,
        )


def synthesize_on_grid(
    frequencies: np.ndarray,
    constant,
    cos_block: np.ndarray,
    sin_block: np.ndarray,
    resolution: int,
) -> np.ndarray:
    """c + sum_k a_k cos(k,x) + b_k sin(k,x) on the uniform M^d grid via inverse FFT.

    Frequencies are folded mod M, so any resolution is exact. Trailing axes of
    the coefficient blocks are carried through as a batch.
    """
    d = frequencies.shape[1]
    M = int(resolution)
    cos_block = np.asarray(cos_block, dtype=np.float64)
    sin_block = np.asarray(sin_block, dtype=np.float64)
    batch = np.shape(constant)
    spectrum = np.zeros((M,) * d + batch, dtype=np.complex128)
    np.add.at(spectrum, tuple((frequencies % M).T), cos_block - 1j * sin_block)
    spectrum[(0,) * d] += constant
    values = np.fft.ifftn(spectrum, axes=tuple(range(d))).real
    return values * float(M) ** d

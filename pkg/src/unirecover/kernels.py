"""Classical univariate trigonometric kernels and their tensor products.

    D_j(x) = sum_{|k|<=j} e^{ikx}            = sin((j+1/2)x) / sin(x/2)
    K_j(x) = sum_{|k|<j} (1-|k|/j) e^{ikx}  = sin(jx/2)^2 / (j sin(x/2)^2)
    V_j(x) = 2 K_{2j}(x) - K_j(x)

All evaluation is real. Where |sin(x/2)| falls under the near-singularity
threshold the closed forms are replaced by direct cosine summation, and at
x = 0 (mod 2*pi) the limit values 2j+1, j and 3j are returned exactly.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from unirecover.config import get_settings
from unirecover.errors import DimensionMismatchError, NonFiniteInputError
from unirecover.torus import torus_reduce

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class KernelKind(str, Enum):
    DIRICHLET = "dirichlet"
    FEJER = "fejer"
    VALLEE_POUSSIN = "vallee_poussin"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    j: int

    def __post_init__(self):
        minimum = 0 if self.kind == KernelKind.DIRICHLET else 1
        if self.j < minimum:
            raise ValueError(f"{self.kind.value} kernel needs j >= {minimum}, got {self.j}")


def _as_finite(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError(f"Kernel argument must be finite, got {x}")
    return arr


def _cosine_series(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """weights[0] + 2 * sum_{k>=1} weights[k] cos(kx)"""
    if weights.size == 1:
        return np.full(x.shape, weights[0])
    k = np.arange(1, weights.size, dtype=np.float64)
    return weights[0] + 2.0 * np.cos(np.multiply.outer(x, k)) @ weights[1:]


def _evaluate(
    x: ArrayLike,
    closed_form,
    weights: np.ndarray,
    limit: float,
    threshold: Optional[float],
) -> ArrayLike:
    arr = _as_finite(x)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    threshold = threshold if threshold is not None else get_settings().near_singularity

    half_sin = np.sin(arr / 2.0)
    singular = np.abs(half_sin) < threshold
    out = np.empty(arr.shape, dtype=np.float64)

    regular = ~singular
    out[regular] = closed_form(arr[regular], half_sin[regular])
    if np.any(singular):
        reduced = torus_reduce(arr[singular])
        near = _cosine_series(reduced, weights)
        out[singular] = np.where(reduced == 0.0, limit, near)

    return float(out[0]) if scalar else out


def dirichlet_eval(j: int, x: ArrayLike, threshold: Optional[float] = None) -> ArrayLike:
    if j < 0:
        raise ValueError(f"Dirichlet kernel needs j >= 0, got {j}")
    return _evaluate(
        x,
        lambda t, h: np.sin((j + 0.5) * t) / h,
        np.ones(j + 1),
        float(2 * j + 1),
        threshold,
    )


def fejer_eval(j: int, x: ArrayLike, threshold: Optional[float] = None) -> ArrayLike:
    if j < 1:
        raise ValueError(f"Fejer kernel needs j >= 1, got {j}")
    weights = 1.0 - np.arange(j, dtype=np.float64) / j
    return _evaluate(
        x,
        lambda t, h: np.sin(j * t / 2.0) ** 2 / (j * h**2),
        weights,
        float(j),
        threshold,
    )


def vp_eval(j: int, x: ArrayLike, threshold: Optional[float] = None) -> ArrayLike:
    """de la Vallee Poussin kernel V_j, a polynomial of order 2j - 1"""
    if j < 1:
        raise ValueError(f"de la Vallee Poussin kernel needs j >= 1, got {j}")
    return 2.0 * fejer_eval(2 * j, x, threshold) - fejer_eval(j, x, threshold)


def _tensor(univariate, jvec: Sequence[int], x: ArrayLike, threshold) -> ArrayLike:
    arr = _as_finite(x)
    if arr.shape[-1:] != (len(jvec),):
        raise DimensionMismatchError(
            f"Order vector has {len(jvec)} entries but points have shape {arr.shape}"
        )
    value = np.ones(arr.shape[:-1])
    for axis, j in enumerate(jvec):
        value = value * univariate(int(j), arr[..., axis], threshold)
    return float(value) if np.ndim(value) == 0 else value


def vp_tensor_eval(
    jvec: Sequence[int], x: ArrayLike, threshold: Optional[float] = None
) -> ArrayLike:
    """prod_i V_{j_i}(x_i); x has shape (..., d)"""
    return _tensor(vp_eval, jvec, x, threshold)


def fejer_tensor_eval(
    jvec: Sequence[int], x: ArrayLike, threshold: Optional[float] = None
) -> ArrayLike:
    return _tensor(fejer_eval, jvec, x, threshold)


def kernel_eval(spec: KernelSpec, x: ArrayLike, threshold: Optional[float] = None) -> ArrayLike:
    evaluators = {
        KernelKind.DIRICHLET: dirichlet_eval,
        KernelKind.FEJER: fejer_eval,
        KernelKind.VALLEE_POUSSIN: vp_eval,
    }
    return evaluators[spec.kind](spec.j, x, threshold)


def kernel_matrix(j: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix V_j(x_i - y_nu) for 1-D coordinate arrays x and y"""
    return vp_eval(j, np.subtract.outer(np.asarray(x, float), np.asarray(y, float)))


def kernel_fourier_coeff(spec: KernelSpec, k: int) -> Fraction:
    """Exact k-th Fourier coefficient of the kernel"""
    a, j = abs(int(k)), spec.j
    if spec.kind == KernelKind.DIRICHLET:
        return Fraction(1 if a <= j else 0)
    if spec.kind == KernelKind.FEJER:
        return max(Fraction(0), 1 - Fraction(a, j))
    if a <= j:
        return Fraction(1)
    if a < 2 * j:
        return 2 - Fraction(a, j)
    return Fraction(0)

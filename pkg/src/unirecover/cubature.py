"""Korobov cubature P_m(f, h) = m^{-1} sum_nu f(w^nu), arithmetic exactness
certificates on hyperbolic crosses, and the measured exactness radius N*.

Exactness on T(N, d) is decided by integers only: the rule integrates
e^{i(k,x)} exactly iff k = 0 or sum_j k_j h_j != 0 (mod m).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from unirecover.errors import CapExceededError, DimensionMismatchError
from unirecover.lattices import Lattice, fibonacci_number
from unirecover.torus import TWO_PI, HyperbolicCrossSpec, enumerate_hyperbolic_cross

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExactnessResult:
    exact: bool
    aliased_mode: Optional[Tuple[int, ...]]


class ExactnessCertificate(BaseModel):
    m: int
    h: List[int]
    d: int
    N_star: int
    first_aliased_mode: Optional[List[int]] = None

    @property
    def gamma_hat(self) -> float:
        return self.N_star / self.m


def cubature_value(samples: Sequence[float], lattice: Optional[Lattice] = None) -> float:
    """Equal-weight average of samples taken at nodes nu = 1..m"""
    values = np.asarray(samples, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError(f"Samples must be a nonempty vector, got shape {values.shape}")
    if lattice is not None and values.size != lattice.m:
        raise ValueError(f"Expected {lattice.m} samples, got {values.size}")
    return float(values.mean())


def character_sum(lattice: Lattice, k: Sequence[int]) -> Tuple[float, float]:
    """(real, imaginary) parts of P_m(e^{i(k,.)}), phases reduced exactly mod m"""
    k = np.asarray(k, dtype=np.int64)
    if k.shape != (lattice.d,):
        raise DimensionMismatchError(f"Frequency {tuple(k)} does not match d={lattice.d}")
    phase = (lattice.points.numerators @ k) % lattice.m
    angle = TWO_PI * phase.astype(np.float64) / lattice.m
    return cubature_value(np.cos(angle)), cubature_value(np.sin(angle))


def _aliased(modes: np.ndarray, m: int, h: np.ndarray) -> np.ndarray:
    nonzero = np.any(modes != 0, axis=1)
    return nonzero & ((modes @ h) % m == 0)


def exactness_check(
    m: int, h: Sequence[int], N: int, d: int, cap: Optional[int] = None
) -> ExactnessResult:
    """Is P_m(., h) exact on T(N, d)? Reports the lexicographically first aliased mode"""
    if len(h) != d:
        raise DimensionMismatchError(f"Generator {tuple(h)} does not have d={d} entries")
    if m < 1:
        raise ValueError(f"Modulus must be >= 1, got {m}")
    modes = enumerate_hyperbolic_cross(HyperbolicCrossSpec(N, d), cap)
    hits = np.flatnonzero(_aliased(modes, m, np.asarray(h, dtype=np.int64) % m))
    if hits.size == 0:
        return ExactnessResult(exact=True, aliased_mode=None)
    return ExactnessResult(exact=False, aliased_mode=tuple(int(v) for v in modes[hits[0]]))


@lru_cache(maxsize=256)
def _max_exact_cross(m: int, h: Tuple[int, ...], d: int, n_max: int) -> ExactnessCertificate:
    hv = np.asarray(h, dtype=np.int64) % m
    N = 1
    while True:
        modes = enumerate_hyperbolic_cross(HyperbolicCrossSpec(N, d))
        aliased = _aliased(modes, m, hv)
        if aliased.any():
            break
        if N >= n_max:
            raise CapExceededError(f"No aliased mode found up to N={N} for m={m}, h={h}")
        N = min(2 * N, n_max)

    # exact on Gamma(P - 1) where P is the smallest hyperbolic product of an aliased mode
    bad = modes[aliased]
    products = np.prod(np.maximum(np.abs(bad), 1), axis=1)
    smallest = int(products.min())
    first = bad[np.flatnonzero(products == smallest)[0]]
    cert = ExactnessCertificate(
        m=m,
        h=list(h),
        d=d,
        N_star=smallest - 1,
        first_aliased_mode=[int(v) for v in first],
    )
    logger.info(f"Exactness radius of m={m}, h={h}: N*={cert.N_star}")
    return cert


def max_exact_cross(
    m: int, h: Sequence[int], d: int, n_max: Optional[int] = None
) -> ExactnessCertificate:
    """Largest N with exactness_check(m, h, N, d) true (0 when even N = 1 fails).

    The frequency (m, 0, ..., 0) always aliases, so the search ends by N = m.
    """
    if len(h) != d:
        raise DimensionMismatchError(f"Generator {tuple(h)} does not have d={d} entries")
    if m < 1:
        raise ValueError(f"Modulus must be >= 1, got {m}")
    return _max_exact_cross(int(m), tuple(int(v) for v in h), int(d), int(n_max or max(m, 1)))


def lattice_certificate(lattice: Lattice) -> ExactnessCertificate:
    return max_exact_cross(lattice.m, lattice.h, lattice.d)


def fibonacci_certificate(n: int) -> ExactnessCertificate:
    return max_exact_cross(fibonacci_number(n), (1, fibonacci_number(n - 1)), 2)


def lattice_budget(N_star: int, d: int) -> Optional[int]:
    """Largest b >= 0 with 2^b <= N*/3^d, None when N* < 3^d"""
    scale = 3**d
    if N_star < scale:
        return None
    b = 0
    while 2 ** (b + 1) * scale <= N_star:
        b += 1
    return b

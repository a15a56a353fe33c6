"""Exact torus-point arithmetic and the frequency-domain combinatorics of
rectangles R(s), hyperbolic crosses Gamma(N, d) and shape collections H(n, d).

Frequency sets are returned as int64 arrays of shape (count, d); row i is
the i-th frequency vector in lexicographic order.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from unirecover.config import get_settings
from unirecover.errors import CapExceededError, NonFiniteInputError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusPoint:
    """The point (2*pi*a_1/M, ..., 2*pi*a_d/M) of the torus, held exactly"""

    numerators: Tuple[int, ...]
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError(f"Modulus must be positive, got {self.modulus}")
        for a in self.numerators:
            if not 0 <= a < self.modulus:
                raise ValueError(
                    f"Numerator {a} outside [0, {self.modulus}) in {self.numerators}"
                )

    @property
    def dim(self) -> int:
        return len(self.numerators)

    @property
    def coordinates(self) -> np.ndarray:
        return TWO_PI * np.asarray(self.numerators, dtype=np.float64) / self.modulus

    @classmethod
    def from_fractions(cls, fractions: Sequence[Fraction]) -> "TorusPoint":
        """Build from unit-interval fractions, e.g. (1/2, 1/4) -> (pi, pi/2)"""
        modulus = 1
        for q in fractions:
            if not 0 <= q < 1:
                raise ValueError(f"Fraction {q} outside [0, 1)")
            modulus = modulus * q.denominator // math.gcd(modulus, q.denominator)
        return cls(
            numerators=tuple(int(q * modulus) for q in fractions), modulus=modulus
        )


@dataclass(frozen=True)
class ShapeVector:
    """s in Z_+^d, indexing the rectangle R(s) = {k : |k_j| < 2^{s_j}}"""

    entries: Tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) < 1:
            raise ValueError("Shape must have at least one entry")
        if any(s < 0 for s in self.entries):
            raise ValueError(f"Shape entries must be nonnegative, got {self.entries}")

    @property
    def weight(self) -> int:
        return sum(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def max_entry(self) -> int:
        return max(self.entries)

    def covers(self, other: "ShapeVector") -> bool:
        """True when R(other) is contained in R(self)"""
        return all(a >= b for a, b in zip(self.entries, other.entries))

    def __str__(self) -> str:
        return "(" + ",".join(str(s) for s in self.entries) + ")"


@dataclass(frozen=True)
class HyperbolicCrossSpec:
    N: int
    d: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"Hyperbolic cross needs N >= 1, got {self.N}")
        if self.d < 1:
            raise ValueError(f"Dimension must be >= 1, got {self.d}")


ShapeLike = Union[ShapeVector, Sequence[int]]


def as_shape(s: ShapeLike) -> ShapeVector:
    if isinstance(s, ShapeVector):
        return s
    return ShapeVector(tuple(int(v) for v in s))


def _check_cap(count: int, cap: Optional[int], what: str) -> None:
    cap = cap if cap is not None else get_settings().cardinality_cap
    if count > cap:
        raise CapExceededError(f"{what} has {count} frequencies, cap is {cap}")


def rectangle_size(s: ShapeLike) -> int:
    s = as_shape(s)
    return math.prod(2 ** (sj + 1) - 1 for sj in s.entries)


def enumerate_rectangle(s: ShapeLike, cap: Optional[int] = None) -> np.ndarray:
    """All k with |k_j| < 2^{s_j}, lexicographic order"""
    s = as_shape(s)
    _check_cap(rectangle_size(s), cap, f"R{s}")
    axes = [np.arange(-(2**sj - 1), 2**sj, dtype=np.int64) for sj in s.entries]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@lru_cache(maxsize=None)
def hyperbolic_cross_size(N: int, d: int) -> int:
    """|Gamma(N, d)| without enumerating it"""
    if N < 1 or d < 1:
        raise ValueError(f"Need N >= 1 and d >= 1, got N={N}, d={d}")
    if d == 1:
        return 2 * N + 1
    # k_1 = 0 and |k_1| = 1 leave the full budget N to the other coordinates
    total = hyperbolic_cross_size(N, d - 1)
    for k in range(1, N + 1):
        total += 2 * hyperbolic_cross_size(N // k, d - 1)
    return total


def _cross_rows(N: int, d: int, memo: Dict[Tuple[int, int], np.ndarray]) -> np.ndarray:
    key = (N, d)
    if key in memo:
        return memo[key]
    if d == 1:
        rows = np.arange(-N, N + 1, dtype=np.int64)[:, None]
    else:
        blocks = []
        for k in range(-N, N + 1):
            tail = _cross_rows(N // max(abs(k), 1), d - 1, memo)
            head = np.full((tail.shape[0], 1), k, dtype=np.int64)
            blocks.append(np.hstack([head, tail]))
        rows = np.vstack(blocks)
    memo[key] = rows
    return rows


def enumerate_hyperbolic_cross(
    spec: HyperbolicCrossSpec, cap: Optional[int] = None
) -> np.ndarray:
    """All k with prod_j max(|k_j|, 1) <= N, lexicographic order"""
    count = hyperbolic_cross_size(spec.N, spec.d)
    _check_cap(count, cap, f"Gamma({spec.N},{spec.d})")
    logger.debug(f"Enumerating Gamma({spec.N},{spec.d}) with {count} frequencies")
    return _cross_rows(spec.N, spec.d, {})


def enumerate_shapes(n: int, d: int) -> List[ShapeVector]:
    """All s in Z_+^d with ||s||_1 = n, strictly increasing lexicographic order"""
    if n < 0:
        raise ValueError(f"Shape weight must be >= 0, got {n}")
    if d < 1:
        raise ValueError(f"Dimension must be >= 1, got {d}")

    def compositions(total: int, parts: int) -> List[Tuple[int, ...]]:
        if parts == 1:
            return [(total,)]
        out = []
        for first in range(total + 1):
            out.extend((first,) + rest for rest in compositions(total - first, parts - 1))
        return out

    return [ShapeVector(c) for c in compositions(n, d)]


def torus_reduce(x) -> np.ndarray:
    """Componentwise reduction modulo 2*pi into [0, 2*pi)"""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError(f"Cannot reduce non-finite coordinates {x}")
    reduced = np.mod(arr, TWO_PI)
    # np.mod can round tiny negatives up to exactly 2*pi
    return np.where(reduced >= TWO_PI, 0.0, reduced)


def format_frequencies_csv(frequencies: np.ndarray) -> str:
    return "\n".join(",".join(str(int(k)) for k in row) for row in frequencies)


def write_frequencies_csv(frequencies: np.ndarray, path: Union[str, Path]) -> None:
    Path(path).write_text(format_frequencies_csv(frequencies) + "\n")

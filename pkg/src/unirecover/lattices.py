"""Fibonacci and Korobov point sets, the Korobov generator search, and base-2
(t, r, d)-net machinery (a verifier for any d plus the d = 2 Hammersley
construction).
"""

import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from unirecover.config import get_settings
from unirecover.errors import CapExceededError, DimensionMismatchError
from unirecover.torus import (
    TWO_PI,
    HyperbolicCrossSpec,
    ShapeVector,
    TorusPoint,
    enumerate_hyperbolic_cross,
    enumerate_shapes,
    hyperbolic_cross_size,
)

logger = logging.getLogger(__name__)

_INT64_MAX = np.iinfo(np.int64).max
_HEADER = re.compile(r"#\s*d\s*=\s*(\d+)\s+m\s*=\s*(\d+)")


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite node set in T^d.

    Attributes:
        coordinates: (m, d) float array with entries in [0, 2*pi)
        label: identifier carried into reports
        numerators: optional exact (m, d) integer form, coordinates = 2*pi*a/modulus
        modulus: common denominator of the exact form
    """

    coordinates: np.ndarray
    label: str = "points"
    numerators: Optional[np.ndarray] = None
    modulus: Optional[int] = None

    @classmethod
    def from_rational(cls, numerators: np.ndarray, modulus: int, label: str) -> "PointSet":
        numerators = np.asarray(numerators, dtype=np.int64)
        return cls(
            coordinates=TWO_PI * numerators.astype(np.float64) / modulus,
            label=label,
            numerators=numerators,
            modulus=int(modulus),
        )

    @property
    def size(self) -> int:
        return self.coordinates.shape[0]

    @property
    def dim(self) -> int:
        return self.coordinates.shape[1]

    @property
    def is_rational(self) -> bool:
        return self.numerators is not None

    def nodes(self) -> List[TorusPoint]:
        if not self.is_rational:
            raise ValueError(f"Point set {self.label} has no exact rational form")
        return [TorusPoint(tuple(int(a) for a in row), self.modulus) for row in self.numerators]

    def node_keys(self) -> frozenset:
        """Exact node set as (numerators, modulus) pairs, for set comparisons"""
        return frozenset((p.numerators, p.modulus) for p in self.nodes())


@dataclass(frozen=True, eq=False)
class KorobovLattice:
    m: int
    h: Tuple[int, ...]
    points: PointSet

    @property
    def d(self) -> int:
        return len(self.h)

    @property
    def nodes(self) -> List[TorusPoint]:
        return self.points.nodes()

    def gcd_report(self) -> dict:
        """Per-axis gcd(h_j, m); nodes are pairwise distinct iff gcd(m, h) = 1"""
        overall = math.gcd(self.m, *self.h)
        return {
            "component_gcds": [math.gcd(hj, self.m) for hj in self.h],
            "gcd": overall,
            "distinct": overall == 1,
        }


@dataclass(frozen=True, eq=False)
class FibonacciLattice:
    n: int
    b_n: int
    b_prev: int
    points: PointSet

    @property
    def m(self) -> int:
        return self.b_n

    @property
    def h(self) -> Tuple[int, int]:
        return (1, self.b_prev % self.b_n)

    @property
    def d(self) -> int:
        return 2

    @property
    def nodes(self) -> List[TorusPoint]:
        return self.points.nodes()

    def to_korobov(self) -> KorobovLattice:
        return KorobovLattice(m=self.b_n, h=self.h, points=self.points)


Lattice = Union[FibonacciLattice, KorobovLattice]
PointSource = Union[PointSet, FibonacciLattice, KorobovLattice]


def as_point_set(source: PointSource) -> PointSet:
    if isinstance(source, PointSet):
        return source
    return source.points


def fibonacci_number(n: int) -> int:
    """b_n with b_0 = b_1 = 1"""
    if n < 0:
        raise ValueError(f"Fibonacci index must be >= 0, got {n}")
    prev, cur = 1, 1
    for _ in range(n - 1):
        prev, cur = cur, prev + cur
    if cur > _INT64_MAX:
        raise OverflowError(f"b_{n} exceeds the int64 range")
    return cur


def _check_lattice_cap(m: int, cap: Optional[int]) -> None:
    cap = cap if cap is not None else get_settings().lattice_cap
    if m > cap:
        raise CapExceededError(f"Lattice with {m} nodes exceeds cap {cap}")


def _rank_one_numerators(m: int, h: Sequence[int]) -> np.ndarray:
    nu = np.arange(1, m + 1, dtype=np.int64)
    return (nu[:, None] * np.asarray(h, dtype=np.int64)[None, :]) % m


def korobov_lattice(
    m: int, h: Sequence[int], cap: Optional[int] = None, label: Optional[str] = None
) -> KorobovLattice:
    """Nodes w^nu = (2*pi{nu h_1/m}, ..., 2*pi{nu h_d/m}), nu = 1..m"""
    if m < 1:
        raise ValueError(f"Korobov lattice needs m >= 1, got {m}")
    _check_lattice_cap(m, cap)
    h = tuple(int(hj) % m for hj in h)
    label = label or f"korobov:{m}," + ",".join(str(hj) for hj in h)
    points = PointSet.from_rational(_rank_one_numerators(m, h), m, label)
    return KorobovLattice(m=m, h=h, points=points)


def fibonacci_lattice(n: int, cap: Optional[int] = None) -> FibonacciLattice:
    """The b_n nodes (2*pi nu/b_n, 2*pi{nu b_{n-1}/b_n})"""
    if n < 2:
        raise ValueError(f"Fibonacci lattice needs n >= 2, got {n}")
    b_n, b_prev = fibonacci_number(n), fibonacci_number(n - 1)
    _check_lattice_cap(b_n, cap)
    points = PointSet.from_rational(_rank_one_numerators(b_n, (1, b_prev)), b_n, f"fib:{n}")
    return FibonacciLattice(n=n, b_n=b_n, b_prev=b_prev, points=points)


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    if m % 2 == 0:
        return m == 2
    return all(m % p for p in range(3, math.isqrt(m) + 1, 2))


def korobov_generator(h: int, d: int, m: int) -> Tuple[int, ...]:
    """(1, h, h^2, ..., h^{d-1}) reduced mod m"""
    return tuple(pow(h, j, m) for j in range(d))


@dataclass(frozen=True)
class KorobovSearchResult:
    m: int
    N: int
    d: int
    h: Optional[int]
    cross_size: int
    prime: bool

    @property
    def found(self) -> bool:
        return self.h is not None

    @property
    def guaranteed(self) -> bool:
        """m prime and d |Gamma(N,d)| < m - 1, under which a clean generator always exists"""
        return self.prime and self.cross_size * self.d < self.m - 1

    @property
    def generator(self) -> Optional[Tuple[int, ...]]:
        return korobov_generator(self.h, self.d, self.m) if self.found else None


def korobov_search(m: int, N: int, d: int, chunk: int = 256) -> KorobovSearchResult:
    """Smallest h in [1, m) whose generator (1, h, ..., h^{d-1}) aliases no
    nonzero frequency of Gamma(N, d), i.e. sum_j k_j h^{j-1} != 0 (mod m)."""
    if m < 1:
        raise ValueError(f"Modulus must be >= 1, got {m}")
    prime = is_prime(m)
    if not prime:
        logger.warning(f"korobov_search: m={m} is not prime, no existence guarantee")
    if N * m * d >= 2**62:
        raise CapExceededError(f"Congruence scan for m={m}, N={N}, d={d} overflows int64")

    cross = enumerate_hyperbolic_cross(HyperbolicCrossSpec(N, d))
    modes = cross[np.any(cross != 0, axis=1)]
    for start in range(1, m, chunk):
        candidates = range(start, min(start + chunk, m))
        generators = np.array([korobov_generator(h, d, m) for h in candidates], dtype=np.int64)
        aliased = ((modes @ generators.T) % m == 0).any(axis=0)
        clean = np.flatnonzero(~aliased)
        if clean.size:
            h = candidates[int(clean[0])]
            logger.info(f"korobov_search: m={m}, N={N}, d={d} -> h={h}")
            return KorobovSearchResult(m, N, d, h, hyperbolic_cross_size(N, d), prime)

    logger.info(f"korobov_search: m={m}, N={N}, d={d} -> no generator")
    return KorobovSearchResult(m, N, d, None, hyperbolic_cross_size(N, d), prime)


@dataclass(frozen=True, eq=False)
class BinaryNet:
    """2^r points of [0,1)^d stored as integer numerators over 2^r"""

    r: int
    d: int
    t: int
    numerators: np.ndarray

    @property
    def modulus(self) -> int:
        return 2**self.r

    @property
    def points(self) -> np.ndarray:
        return self.numerators.astype(np.float64) / self.modulus


@dataclass(frozen=True)
class DyadicBox:
    shape: ShapeVector
    anchor: Tuple[int, ...]
    count: int
    expected: int


@dataclass(frozen=True)
class NetCheck:
    ok: bool
    violating_box: Optional[DyadicBox]
    boxes_checked: int


def _bit_reverse(values: np.ndarray, bits: int) -> np.ndarray:
    out = np.zeros_like(values)
    for b in range(bits):
        out |= ((values >> b) & 1) << (bits - 1 - b)
    return out


def hammersley_net(r: int) -> BinaryNet:
    """{(i / 2^r, bitreverse_r(i) / 2^r)}, a (0, r, 2)-net"""
    cap = get_settings().net_resolution_cap
    if r < 1:
        raise ValueError(f"Net resolution must be >= 1, got {r}")
    if r > cap:
        raise CapExceededError(f"Net resolution {r} exceeds cap {cap}")
    i = np.arange(2**r, dtype=np.int64)
    return BinaryNet(r=r, d=2, t=0, numerators=np.column_stack([i, _bit_reverse(i, r)]))


def _box_indices(points, s: ShapeVector) -> List[np.ndarray]:
    if isinstance(points, BinaryNet):
        return [points.numerators[:, j] >> (points.r - sj) for j, sj in enumerate(s.entries)]
    return [
        np.minimum(np.floor(points[:, j] * 2**sj).astype(np.int64), 2**sj - 1)
        for j, sj in enumerate(s.entries)
    ]


def verify_net_property(
    points: Union[BinaryNet, np.ndarray], t: int, r: int, d: int
) -> NetCheck:
    """Check that every dyadic box of volume 2^{t-r} holds exactly 2^t points"""
    if not 0 <= t <= r:
        raise ValueError(f"Need 0 <= t <= r, got t={t}, r={r}")
    if isinstance(points, BinaryNet):
        count, dim = points.numerators.shape
        if points.r < r - t:
            raise ValueError(f"Net of resolution {points.r} cannot resolve boxes of level {r - t}")
    else:
        points = np.asarray(points, dtype=np.float64)
        count, dim = points.shape
        if np.any(points < 0) or np.any(points >= 1):
            raise ValueError("Net points must lie in [0, 1)^d")
    if dim != d:
        raise DimensionMismatchError(f"Points have dimension {dim}, expected {d}")
    if count != 2**r:
        raise ValueError(f"A (t,{r},{d})-net has {2**r} points, got {count}")

    expected = 2**t
    checked = 0
    for s in enumerate_shapes(r - t, d):
        dims = tuple(2**sj for sj in s.entries)
        linear = np.ravel_multi_index(tuple(_box_indices(points, s)), dims)
        counts = np.bincount(linear, minlength=2 ** (r - t))
        checked += counts.size
        bad = np.flatnonzero(counts != expected)
        if bad.size:
            first = int(bad[0])
            anchor = tuple(int(a) + 1 for a in np.unravel_index(first, dims))
            box = DyadicBox(shape=s, anchor=anchor, count=int(counts[first]), expected=expected)
            logger.info(f"Net property fails at shape {s}, anchor {anchor}: {box.count} points")
            return NetCheck(ok=False, violating_box=box, boxes_checked=checked)
    return NetCheck(ok=True, violating_box=None, boxes_checked=checked)


def scale_to_torus(points: Union[BinaryNet, np.ndarray], label: str = "net") -> PointSet:
    """Map [0,1)^d to T^d, keeping dyadic rationals exact"""
    if isinstance(points, BinaryNet):
        return PointSet.from_rational(points.numerators, points.modulus, label)

    points = np.asarray(points, dtype=np.float64)
    if np.any(points < 0) or np.any(points >= 1):
        raise ValueError("Unit-cube points must lie in [0, 1)^d")
    fractions = [[Fraction(float(c)) for c in row] for row in points]
    modulus = 1
    for row in fractions:
        for q in row:
            modulus = max(modulus, q.denominator)
    # binary floats have power-of-two denominators, so the largest is their lcm
    if modulus > 2**62:
        return PointSet(coordinates=TWO_PI * points, label=label)
    numerators = np.array([[int(q * modulus) for q in row] for row in fractions], dtype=np.int64)
    return PointSet.from_rational(numerators, modulus, label)


def write_point_file(points: PointSource, path: Union[str, Path]) -> None:
    ps = as_point_set(points)
    lines = [f"# d={ps.dim} m={ps.size}"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in ps.coordinates]
    Path(path).write_text("\n".join(lines) + "\n")


def _read_rows(path: Union[str, Path]) -> Tuple[int, int, np.ndarray]:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"Point file {path} is empty")
    match = _HEADER.match(text[0].strip())
    if not match:
        raise ValueError(f"Point file {path} must start with '# d=<d> m=<m>'")
    d, m = int(match.group(1)), int(match.group(2))
    rows = [line.split() for line in text[1:] if line.strip() and not line.startswith("#")]
    coords = np.array(rows, dtype=np.float64).reshape(len(rows), -1) if rows else np.empty((0, d))
    if coords.shape != (m, d):
        raise ValueError(f"Point file {path} declares {m}x{d} but holds {coords.shape}")
    return d, m, coords


def read_point_file(path: Union[str, Path], label: Optional[str] = None) -> PointSet:
    _, _, coords = _read_rows(path)
    if np.any(coords < 0) or np.any(coords >= TWO_PI):
        raise ValueError(f"Point file {path} has coordinates outside [0, 2*pi)")
    return PointSet(coordinates=coords, label=label or Path(path).stem)


def read_unit_points(path: Union[str, Path]) -> np.ndarray:
    """Externally supplied net in [0,1)^d, same header format"""
    _, _, coords = _read_rows(path)
    return coords

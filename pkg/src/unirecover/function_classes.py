"""Test functions of known anisotropic smoothness and best-approximation oracles.

Bernoulli kernels F_r(x, a) = 1 + 2 sum_{k>=1} k^{-r} cos(kx - a*pi/2) generate
the Sobolev-type classes through f = F_r * phi with |phi| <= 1. Two generators
are offered per axis:

    kernel  phi = delta, the bare truncated kernel F_r^K (needs r > 1)
    sign    phi = sign(sin y), giving (4/pi) sum_{odd k<=K} k^{-(r+1)} sin(kx - a*pi/2),
            an actual member of the unit ball of the class (any r > 0)

Products over the axes are evaluated separably on tensor grids.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from unirecover.basis import RealBasis, positive_half, synthesize_on_grid
from unirecover.config import get_settings
from unirecover.errors import ConfigError, DimensionMismatchError, NonFiniteInputError
from unirecover.recovery import (
    ChebyshevFit,
    EvaluationGrid,
    Points,
    Sampler,
    as_coordinates,
    chebyshev_fit,
    sample_grid,
    sample_points,
)
from unirecover.torus import ShapeLike, as_shape

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_SPEC = re.compile(r"^\s*(\w+)\s*:(.*)$")


class FunctionKind(str, Enum):
    BERNOULLI_PRODUCT = "bernoulli"
    TRIG_POLYNOMIAL = "trig"
    USER_SAMPLES = "samples"


class Generator(str, Enum):
    KERNEL = "kernel"
    SIGN = "sign"


@dataclass(frozen=True)
class SmoothnessVector:
    r: Tuple[float, ...]
    alpha: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        r = tuple(float(v) for v in self.r)
        if not r:
            raise ValueError("Smoothness vector must have at least one entry")
        if any(not math.isfinite(v) or v <= 0 for v in r):
            raise ValueError(f"Smoothness entries must be positive, got {r}")
        alpha = tuple(float(a) for a in self.alpha) if self.alpha is not None else (0.0,) * len(r)
        if len(alpha) != len(r):
            raise DimensionMismatchError(f"alpha {alpha} does not match r {r}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "alpha", alpha)

    @property
    def d(self) -> int:
        return len(self.r)

    @property
    def g(self) -> float:
        return g_of_r(self)


def g_of_r(r: Union[SmoothnessVector, Sequence[float]]) -> float:
    """(sum_j 1/r_j)^{-1}"""
    values = r.r if isinstance(r, SmoothnessVector) else tuple(float(v) for v in r)
    if not values or any(v <= 0 for v in values):
        raise ValueError(f"g(r) needs positive entries, got {values}")
    return 1.0 / sum(1.0 / v for v in values)


class SeriesValue(NamedTuple):
    value: ArrayLike
    tail_bound: float


def _trig_series(x: np.ndarray, k: np.ndarray, cos_w: np.ndarray, sin_w: np.ndarray) -> np.ndarray:
    """sum_i cos_w[i] cos(k_i x) + sin_w[i] sin(k_i x), chunked over k"""
    flat = x.ravel()
    out = np.zeros(flat.shape)
    use_sin = np.any(sin_w != 0)
    step = max(1, 2**22 // max(flat.size, 1))
    for start in range(0, k.size, step):
        stop = start + step
        phase = np.multiply.outer(flat, k[start:stop])
        out += np.cos(phase) @ cos_w[start:stop]
        if use_sin:
            out += np.sin(phase) @ sin_w[start:stop]
    return out.reshape(x.shape)


def _finite(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError(f"Evaluation points must be finite, got {x}")
    return arr


def _scalar_or_array(arr: np.ndarray, scalar: bool) -> ArrayLike:
    return float(arr) if scalar else arr


def bernoulli_eval(r: float, alpha: float, x: ArrayLike, K: int) -> SeriesValue:
    """K-term partial sum of F_r(x, alpha) with the bound 2 K^{1-r} / (r-1) on
    the discarded tail."""
    if r <= 1:
        raise ValueError(f"Bernoulli kernel needs r > 1 for a summable tail, got r={r}")
    if K < 1:
        raise ValueError(f"Truncation K must be >= 1, got {K}")
    arr = _finite(x)
    k = np.arange(1, K + 1, dtype=np.float64)
    weights = 2.0 * k ** (-r)
    theta = alpha * np.pi / 2.0
    value = 1.0 + _trig_series(arr, k, weights * np.cos(theta), weights * np.sin(theta))
    tail = 2.0 * K ** (1.0 - r) / (r - 1.0)
    return SeriesValue(_scalar_or_array(value, arr.ndim == 0), tail)


def sign_bernoulli_eval(r: float, alpha: float, x: ArrayLike, K: int) -> SeriesValue:
    """(F_r * sign(sin .))(x): (4/pi) sum_{odd k<=K} k^{-(r+1)} sin(kx - alpha*pi/2),
    tail bound (4/pi) K^{-r} / r"""
    if r <= 0:
        raise ValueError(f"Smoothness must be positive, got r={r}")
    if K < 1:
        raise ValueError(f"Truncation K must be >= 1, got {K}")
    arr = _finite(x)
    k = np.arange(1, K + 1, 2, dtype=np.float64)
    weights = (4.0 / np.pi) * k ** (-(r + 1.0))
    theta = alpha * np.pi / 2.0
    value = _trig_series(arr, k, -weights * np.sin(theta), weights * np.cos(theta))
    tail = (4.0 / np.pi) * K ** (-r) / r
    return SeriesValue(_scalar_or_array(value, arr.ndim == 0), tail)


def _partial_sum_bound(r: float, K: int, generator: "Generator") -> float:
    """sup_x of the truncated series"""
    if generator == Generator.KERNEL:
        return 1.0 + 2.0 * float(np.sum(np.arange(1, K + 1, dtype=np.float64) ** (-r)))
    return (4.0 / np.pi) * float(np.sum(np.arange(1, K + 1, 2, dtype=np.float64) ** (-(r + 1.0))))


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """constant + sum_k a_k cos(k,x) + b_k sin(k,x), k over a positive half of frequencies"""

    frequencies: np.ndarray = field(repr=False)
    cos_coefficients: np.ndarray = field(repr=False)
    sin_coefficients: np.ndarray = field(repr=False)
    constant: float = 0.0

    @classmethod
    def from_basis(cls, basis: RealBasis, coefficients: np.ndarray) -> "TrigPolynomial":
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.shape != (basis.dim,):
            raise ValueError(f"Expected {basis.dim} coefficients, got {coefficients.shape}")
        H = basis.half.shape[0]
        return cls(
            frequencies=basis.half,
            cos_coefficients=coefficients[1 : 1 + H],
            sin_coefficients=coefficients[1 + H :],
            constant=float(coefficients[0]),
        )

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    def evaluate(self, points: np.ndarray, chunk: int = 65536) -> np.ndarray:
        points = np.atleast_2d(_finite(points))
        if points.shape[1] != self.d:
            raise DimensionMismatchError(f"Points have dimension {points.shape[1]}, polynomial has {self.d}")
        freq = self.frequencies.T.astype(np.float64)
        out = np.full(points.shape[0], self.constant)
        for start in range(0, points.shape[0], chunk):
            phase = points[start : start + chunk] @ freq
            out[start : start + chunk] += np.cos(phase) @ self.cos_coefficients
            out[start : start + chunk] += np.sin(phase) @ self.sin_coefficients
        return out

    def evaluate_grid(self, grid: EvaluationGrid) -> np.ndarray:
        if grid.d != self.d:
            raise DimensionMismatchError(f"Grid has dimension {grid.d}, polynomial has {self.d}")
        return synthesize_on_grid(
            self.frequencies,
            self.constant,
            self.cos_coefficients,
            self.sin_coefficients,
            grid.resolution,
        )


def random_trig_polynomial(
    s: ShapeLike, rng: np.random.Generator, scale: float = 1.0
) -> TrigPolynomial:
    """Member of T(R(s)) with coefficients uniform in [-scale, scale]"""
    basis = RealBasis.for_shape(as_shape(s))
    return TrigPolynomial.from_basis(basis, rng.uniform(-scale, scale, basis.dim))


def read_trig_file(path: Union[str, Path], d: int) -> TrigPolynomial:
    """Lines "k_1,...,k_d,a,b" meaning a cos(k,x) + b sin(k,x); k = 0 carries the constant"""
    terms: Dict[Tuple[int, ...], np.ndarray] = {}
    constant = 0.0
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [v.strip() for v in line.split(",")]
        if len(fields) != d + 2:
            raise ConfigError(f"{path}:{number}: expected {d + 2} fields, got {len(fields)}")
        k = np.array([int(v) for v in fields[:d]], dtype=np.int64)
        a, b = float(fields[d]), float(fields[d + 1])
        if not np.any(k):
            constant += a
            continue
        if positive_half(k[None, :]).shape[0] == 0:
            # cos is even and sin is odd under k -> -k
            k, b = -k, -b
        key = tuple(int(v) for v in k)
        terms[key] = terms.get(key, np.zeros(2)) + (a, b)

    keys = sorted(terms)
    frequencies = np.array(keys, dtype=np.int64).reshape(len(keys), d)
    coeffs = np.array([terms[key] for key in keys]).reshape(len(keys), 2)
    return TrigPolynomial(frequencies, coeffs[:, 0].copy(), coeffs[:, 1].copy(), constant)


def write_trig_file(poly: TrigPolynomial, path: Union[str, Path]) -> None:
    lines = [",".join(["0"] * poly.d + [repr(poly.constant), "0"])]
    for k, a, b in zip(poly.frequencies, poly.cos_coefficients, poly.sin_coefficients):
        lines.append(",".join([str(int(v)) for v in k] + [repr(float(a)), repr(float(b))]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_samples_file(path: Union[str, Path]) -> np.ndarray:
    """One sample value per line, in node order; '#' lines are comments"""
    rows = [
        line.strip()
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    try:
        values = np.array([float(v) for v in rows], dtype=np.float64)
    except ValueError as e:
        raise ConfigError(f"Sample file {path}: {e}") from e
    if values.size == 0:
        raise ConfigError(f"Sample file {path} holds no values")
    return values


@dataclass(frozen=True, eq=False)
class TestFunction:
    __test__ = False

    kind: FunctionKind
    d: int
    smoothness: Optional[SmoothnessVector] = None
    truncation: Optional[int] = None
    generator: Generator = Generator.KERNEL
    polynomial: Optional[TrigPolynomial] = None
    node_values: Optional[np.ndarray] = field(default=None, repr=False)
    label: str = ""

    def _axis(self, axis: int, x: np.ndarray) -> SeriesValue:
        r, alpha = self.smoothness.r[axis], self.smoothness.alpha[axis]
        if self.generator == Generator.SIGN:
            return sign_bernoulli_eval(r, alpha, x, self.truncation)
        return bernoulli_eval(r, alpha, x, self.truncation)

    def _check_evaluable(self):
        if self.kind == FunctionKind.USER_SAMPLES:
            raise ValueError(f"{self.label or 'User samples'} are known only at their nodes")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        self._check_evaluable()
        if self.kind == FunctionKind.TRIG_POLYNOMIAL:
            return self.polynomial.evaluate(points)
        points = np.atleast_2d(_finite(points))
        if points.shape[1] != self.d:
            raise DimensionMismatchError(f"Points have dimension {points.shape[1]}, function has {self.d}")
        value = np.ones(points.shape[0])
        for axis in range(self.d):
            value = value * self._axis(axis, points[:, axis]).value
        return value

    def evaluate_grid(self, grid: EvaluationGrid) -> np.ndarray:
        self._check_evaluable()
        if grid.d != self.d:
            raise DimensionMismatchError(f"Grid has dimension {grid.d}, function has {self.d}")
        if self.kind == FunctionKind.TRIG_POLYNOMIAL:
            return self.polynomial.evaluate_grid(grid)
        axis = grid.axis()
        tensor = np.ones(())
        for j in range(self.d):
            tensor = np.multiply.outer(tensor, self._axis(j, axis).value)
        return tensor

    @property
    def axis_tail_bounds(self) -> Tuple[float, ...]:
        if self.kind != FunctionKind.BERNOULLI_PRODUCT:
            return ()
        return tuple(self._axis(j, np.zeros(1)).tail_bound for j in range(self.d))

    @property
    def tail_bound(self) -> float:
        """Uniform bound on |f - f^K| for the product of truncated series"""
        if self.kind != FunctionKind.BERNOULLI_PRODUCT:
            return 0.0
        sups = [
            _partial_sum_bound(r, self.truncation, self.generator) for r in self.smoothness.r
        ]
        return math.prod(m + t for m, t in zip(sups, self.axis_tail_bounds)) - math.prod(sups)

    @property
    def g(self) -> Optional[float]:
        return self.smoothness.g if self.smoothness is not None else None


def make_test_function(
    r: SmoothnessVector,
    K: Optional[int] = None,
    generator: Union[Generator, str] = Generator.KERNEL,
) -> TestFunction:
    generator = Generator(generator)
    K = K or get_settings().bernoulli_truncation
    if K < 1:
        raise ValueError(f"Truncation K must be >= 1, got {K}")
    if generator == Generator.KERNEL and any(v <= 1 for v in r.r):
        raise ValueError(f"Bernoulli kernel product needs every r_j > 1, got {r.r}")
    label = (
        "bernoulli:r=" + ",".join(f"{v:g}" for v in r.r)
        + ";alpha=" + ",".join(f"{a:g}" for a in r.alpha)
        + f";K={K};phi={generator.value}"
    )
    return TestFunction(
        kind=FunctionKind.BERNOULLI_PRODUCT,
        d=r.d,
        smoothness=r,
        truncation=K,
        generator=generator,
        label=label,
    )


def trig_function(poly: TrigPolynomial, label: str = "trig") -> TestFunction:
    return TestFunction(kind=FunctionKind.TRIG_POLYNOMIAL, d=poly.d, polynomial=poly, label=label)


def samples_function(values: Sequence[float], d: int, label: str = "samples") -> TestFunction:
    return TestFunction(
        kind=FunctionKind.USER_SAMPLES,
        d=d,
        node_values=np.asarray(values, dtype=np.float64),
        label=label,
    )


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def parse_function_spec(text: str, d: int) -> TestFunction:
    """bernoulli:r=2,2;alpha=0,0;K=4096;phi=sign | trig:<file> | samples:<file>"""
    match = _SPEC.match(text)
    if not match:
        raise ConfigError(f"Function spec {text!r} must look like <kind>:<params>")
    kind, body = match.group(1), match.group(2).strip()

    if kind == FunctionKind.TRIG_POLYNOMIAL.value:
        return trig_function(read_trig_file(body, d), label=text)
    if kind == FunctionKind.USER_SAMPLES.value:
        return samples_function(read_samples_file(body), d, label=text)
    if kind != FunctionKind.BERNOULLI_PRODUCT.value:
        raise ConfigError(f"Unknown function kind {kind!r} in {text!r}")

    params = {}
    for item in filter(None, (p.strip() for p in body.split(";"))):
        if "=" not in item:
            raise ConfigError(f"Malformed parameter {item!r} in {text!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    unknown = set(params) - {"r", "alpha", "K", "phi"}
    if unknown:
        raise ConfigError(f"Unknown parameters {sorted(unknown)} in {text!r}")
    if "r" not in params:
        raise ConfigError(f"Bernoulli spec {text!r} needs r=")
    try:
        r = _floats(params["r"])
        alpha = _floats(params["alpha"]) if "alpha" in params else None
        K = int(params["K"]) if "K" in params else None
        generator = Generator(params.get("phi", Generator.KERNEL.value))
    except ValueError as e:
        raise ConfigError(f"Bad parameter value in {text!r}: {e}") from e
    if len(r) != d:
        raise DimensionMismatchError(f"Spec {text!r} has {len(r)} smoothness entries, need {d}")
    return make_test_function(SmoothnessVector(r, alpha), K, generator)


def best_approx_fit(
    f: Sampler,
    s: ShapeLike,
    grid: EvaluationGrid,
    nodes: Optional[Points] = None,
) -> ChebyshevFit:
    """Minimax fit from T(R(s)) with the grid (and the nodes, when given and
    included) as sampling points. Functions known only at nodes are fitted there."""
    known = getattr(f, "node_values", None)
    if known is not None:
        if nodes is None:
            raise ValueError("Node samples need the node set they were taken on")
        return chebyshev_fit(nodes, known, s)

    points = grid.points()
    values = sample_grid(f, grid).ravel()
    if nodes is not None and grid.include_nodes:
        node_coords = as_coordinates(nodes)
        points = np.vstack([points, node_coords])
        values = np.concatenate([values, sample_points(f, node_coords)])
    return chebyshev_fit(points, values, s)


def best_approx_oracle(
    f: Sampler,
    s: ShapeLike,
    grid: EvaluationGrid,
    nodes: Optional[Points] = None,
) -> float:
    """d^(f, T(R(s)))_inf, a grid estimate of the uniform best approximation"""
    return best_approx_fit(f, s, grid, nodes).residual

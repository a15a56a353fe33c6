"""Sampling recovery operators on T^d.

  V_s(f)(x) = m^{-1} sum_nu f(y^nu) V_{2^s}(x - y^nu)     kernel convolution on a lattice
  V^n(f)    = V_{s°}(f), s° the best shape with ||s||_1 = n
  l(xi, X)  = discrete Chebyshev (minimax) fit on a node set, per shape
              then selected the same way

Uniform norms are measured on an EvaluationGrid: a uniform tensor grid whose
per-axis resolution oversamples the largest candidate rectangle, united with
the node set in use. Every argmin takes the first minimizer in shape order,
which is the lexicographically smallest shape.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import linprog

from unirecover.basis import RealBasis
from unirecover.config import get_settings
from unirecover.cubature import lattice_budget, lattice_certificate
from unirecover.errors import DimensionMismatchError, NonFiniteInputError, UnirecoverError
from unirecover.kernels import kernel_matrix
from unirecover.lattices import (
    FibonacciLattice,
    KorobovLattice,
    PointSet,
    PointSource,
    as_point_set,
)
from unirecover.torus import TWO_PI, ShapeLike, ShapeVector, TorusPoint, as_shape, enumerate_shapes
from unirecover.utils import parallel_map

logger = logging.getLogger(__name__)

Sampler = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, Any]
Points = Union[PointSource, Sequence[TorusPoint], np.ndarray]

_TENSOR_AXES = "abcdefgh"
_BLOCK_ENTRIES = 2**22


@dataclass(frozen=True)
class EvaluationGrid:
    """Uniform tensor grid {2*pi*i/M}^d, optionally united with the node set"""

    resolution: int
    d: int
    include_nodes: bool = True

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError(f"Grid resolution must be >= 1, got {self.resolution}")
        if not 1 <= self.d <= len(_TENSOR_AXES):
            raise ValueError(f"Grid dimension must be in [1, {len(_TENSOR_AXES)}], got {self.d}")

    @classmethod
    def for_shapes(
        cls,
        shapes: Sequence[ShapeLike],
        d: Optional[int] = None,
        oversampling: Optional[int] = None,
        include_nodes: bool = True,
    ) -> "EvaluationGrid":
        """Resolution oversampling * 2^{max s_j} over all candidate shapes"""
        shapes = [as_shape(s) for s in shapes]
        if not shapes:
            raise ValueError("Cannot size an evaluation grid for an empty shape list")
        oversampling = oversampling or get_settings().grid_oversampling
        top = max(s.max_entry for s in shapes)
        return cls(oversampling * 2**top, d or shapes[0].dim, include_nodes)

    @property
    def size(self) -> int:
        return self.resolution**self.d

    @property
    def tensor_shape(self) -> Tuple[int, ...]:
        return (self.resolution,) * self.d

    def axis(self) -> np.ndarray:
        return TWO_PI * np.arange(self.resolution, dtype=np.float64) / self.resolution

    def axes(self) -> List[np.ndarray]:
        return [self.axis()] * self.d

    def points(self) -> np.ndarray:
        """(M^d, d) array, row-major over the tensor axes"""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def describe(self) -> Dict[str, Any]:
        return {
            "resolution": self.resolution,
            "d": self.d,
            "include_nodes": self.include_nodes,
            "size": self.size,
        }


def _separable_sum(factors: Sequence[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """sum_nu w_nu prod_j A_j[i_j, nu] as a d-way tensor"""
    letters = _TENSOR_AXES[: len(factors)]
    subscripts = ",".join(f"{c}z" for c in letters) + ",z->" + letters
    return np.einsum(subscripts, *factors, weights, optimize="greedy")


def _kernel_blocks(
    orders: Sequence[int], x: np.ndarray, y: np.ndarray
) -> Iterator[np.ndarray]:
    """Row blocks of prod_j V_{orders_j}(x_ij - y_nuj)"""
    step = max(1, _BLOCK_ENTRIES // max(y.shape[0], 1))
    for start in range(0, x.shape[0], step):
        block = x[start : start + step]
        product = np.ones((block.shape[0], y.shape[0]))
        for axis, j in enumerate(orders):
            product *= kernel_matrix(j, block[:, axis], y[:, axis])
        yield product


def is_point_source(points) -> bool:
    return isinstance(points, (PointSet, FibonacciLattice, KorobovLattice))


def as_coordinates(points: Points) -> np.ndarray:
    if is_point_source(points):
        return as_point_set(points).coordinates
    if len(points) and isinstance(points[0], TorusPoint):
        return np.stack([p.coordinates for p in points])
    return np.atleast_2d(np.asarray(points, dtype=np.float64))


class Approximant(ABC):
    shape: ShapeVector

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at points of shape (p, d)"""

    def evaluate_grid(self, grid: EvaluationGrid) -> np.ndarray:
        return self.evaluate(grid.points()).reshape(grid.tensor_shape)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(points)


@dataclass(frozen=True, eq=False)
class KernelSumApproximant(Approximant):
    """(1/m) sum_nu samples_nu V_{2^s}(x - y^nu)"""

    point_set: PointSet
    samples: np.ndarray = field(repr=False)
    shape: ShapeVector
    within_budget: Optional[bool] = None

    @property
    def orders(self) -> Tuple[int, ...]:
        return tuple(2**sj for sj in self.shape.entries)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.point_set.dim:
            raise DimensionMismatchError(
                f"Points have dimension {points.shape[1]}, approximant has {self.point_set.dim}"
            )
        y = self.point_set.coordinates
        parts = [block @ self.samples for block in _kernel_blocks(self.orders, points, y)]
        values = np.concatenate(parts) if parts else np.empty(0)
        return values / self.point_set.size

    def evaluate_grid(self, grid: EvaluationGrid) -> np.ndarray:
        if grid.d != self.point_set.dim:
            raise DimensionMismatchError(f"Grid has dimension {grid.d}, approximant has {self.point_set.dim}")
        y = self.point_set.coordinates
        axis = grid.axis()
        factors = [kernel_matrix(j, axis, y[:, a]) for a, j in enumerate(self.orders)]
        return _separable_sum(factors, self.samples) / self.point_set.size


@dataclass(frozen=True, eq=False)
class TrigApproximant(Approximant):
    basis: RealBasis
    coefficients: np.ndarray = field(repr=False)

    @property
    def shape(self) -> ShapeVector:
        return self.basis.shape

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.shape.dim:
            raise DimensionMismatchError(
                f"Points have dimension {points.shape[1]}, approximant has {self.shape.dim}"
            )
        return self.basis.evaluate(self.coefficients, points)

    def evaluate_grid(self, grid: EvaluationGrid) -> np.ndarray:
        if grid.d != self.shape.dim:
            raise DimensionMismatchError(f"Grid has dimension {grid.d}, approximant has {self.shape.dim}")
        return self.basis.evaluate_grid(self.coefficients, grid.resolution)


class RecoverySummary(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: str
    lattice: str
    chosen_shape: List[int]
    per_shape_errors: Dict[str, float]
    winner_error: float
    grid: Dict[str, Any]
    within_budget: Optional[bool] = None
    residuals: Optional[Dict[str, float]] = None
    discretization_constant: Optional[float] = None


@dataclass
class RecoveryResult:
    approximant: Approximant
    chosen_shape: ShapeVector
    per_shape_errors: Dict[ShapeVector, float]
    winner_error: float
    grid: EvaluationGrid
    method: str
    lattice: str
    within_budget: Optional[bool] = None
    residuals: Dict[ShapeVector, float] = field(default_factory=dict)
    discretization_constant: Optional[float] = None

    def summary(self) -> RecoverySummary:
        return RecoverySummary(
            method=self.method,
            lattice=self.lattice,
            chosen_shape=list(self.chosen_shape.entries),
            per_shape_errors={str(s): e for s, e in self.per_shape_errors.items()},
            winner_error=self.winner_error,
            grid=self.grid.describe(),
            within_budget=self.within_budget,
            residuals={str(s): r for s, r in self.residuals.items()} or None,
            discretization_constant=self.discretization_constant,
        )


def lebesgue_factor(d: int) -> int:
    """3^d, the operator norm bound of V_s on certified shapes"""
    return 3**d


def certified_budget(lattice: PointSource) -> Optional[int]:
    """Largest b with 2^b <= N*/3^d for a lattice; None for plain point sets"""
    if isinstance(lattice, (FibonacciLattice, KorobovLattice)):
        return lattice_budget(lattice_certificate(lattice).N_star, lattice.d)
    return None


def _is_lattice(source) -> bool:
    return isinstance(source, (FibonacciLattice, KorobovLattice))


def _finite_vector(values, size: int, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.shape != (size,):
        raise ValueError(f"Expected {size} {what}, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise NonFiniteInputError(f"{what.capitalize()} must be finite")
    return values


def vs_apply(
    lattice: PointSource,
    samples: Sequence[float],
    s: ShapeLike,
    budget: Optional[int] = None,
) -> KernelSumApproximant:
    """Kernel-convolution approximant V_s from samples at the lattice nodes.

    Args:
        lattice: Fibonacci/Korobov lattice, or a bare PointSet
        samples: f(y^nu) for nu = 1..m, in node order
        s: shape vector; 2^s gives the kernel orders
        budget: certified weight budget; measured from the lattice when omitted

    Returns:
        KernelSumApproximant whose within_budget flag is False when ||s||_1
        exceeds the certified budget (the approximant is still built).
    """
    ps = as_point_set(lattice)
    s = as_shape(s)
    if s.dim != ps.dim:
        raise DimensionMismatchError(f"Shape {s} does not match point dimension {ps.dim}")
    samples = _finite_vector(samples, ps.size, "samples")

    if budget is None and _is_lattice(lattice):
        budget = certified_budget(lattice)
        within = budget is not None and s.weight <= budget
    elif budget is not None:
        within = s.weight <= budget
    else:
        within = None
    if within is False:
        logger.warning(f"Shape {s} on {ps.label} is outside the certified budget {budget}")
    return KernelSumApproximant(point_set=ps, samples=samples, shape=s, within_budget=within)


def lebesgue_vs(
    lattice: PointSource, s: ShapeLike, grid: Optional[EvaluationGrid] = None
) -> float:
    """max_x (1/m) sum_nu |V_{2^s}(x - y^nu)| over the grid (and nodes)"""
    ps = as_point_set(lattice)
    s = as_shape(s)
    if s.dim != ps.dim:
        raise DimensionMismatchError(f"Shape {s} does not match point dimension {ps.dim}")
    grid = grid or EvaluationGrid.for_shapes([s], ps.dim)
    floor = get_settings().grid_oversampling * 2**s.max_entry
    if grid.resolution < floor:
        logger.warning(f"Grid resolution {grid.resolution} is below the floor {floor} for {s}")

    y = ps.coordinates
    orders = [2**sj for sj in s.entries]
    axis = grid.axis()
    factors = [np.abs(kernel_matrix(j, axis, y[:, a])) for a, j in enumerate(orders)]
    value = float(_separable_sum(factors, np.ones(ps.size)).max())
    if grid.include_nodes:
        for block in _kernel_blocks(orders, y, y):
            value = max(value, float(np.abs(block).sum(axis=1).max()))
    return value / ps.size


def _known_node_values(sampler: Sampler) -> Optional[np.ndarray]:
    if isinstance(sampler, np.ndarray):
        return sampler
    return getattr(sampler, "node_values", None)


def sample_points(sampler: Sampler, points: np.ndarray) -> np.ndarray:
    evaluate = getattr(sampler, "evaluate", sampler)
    return _finite_vector(evaluate(points), points.shape[0], "function values")


def sample_grid(sampler: Sampler, grid: EvaluationGrid) -> np.ndarray:
    if hasattr(sampler, "evaluate_grid"):
        values = np.asarray(sampler.evaluate_grid(grid), dtype=np.float64)
    else:
        values = sample_points(sampler, grid.points()).reshape(grid.tensor_shape)
    if not np.all(np.isfinite(values)):
        raise NonFiniteInputError("Function values on the grid must be finite")
    return values


@dataclass(frozen=True)
class _Targets:
    """f on the tensor grid (None when only node values are known) and at the nodes"""

    on_grid: Optional[np.ndarray]
    at_nodes: np.ndarray
    nodes: np.ndarray


def _targets(sampler: Sampler, nodes: np.ndarray, grid: EvaluationGrid) -> _Targets:
    known = _known_node_values(sampler)
    if known is not None:
        return _Targets(None, _finite_vector(known, nodes.shape[0], "samples"), nodes)
    return _Targets(sample_grid(sampler, grid), sample_points(sampler, nodes), nodes)


def _uniform_error(approx: Approximant, targets: _Targets, grid: EvaluationGrid) -> float:
    error = 0.0
    if targets.on_grid is not None:
        error = float(np.abs(targets.on_grid - approx.evaluate_grid(grid)).max())
    if targets.on_grid is None or grid.include_nodes:
        error = max(error, float(np.abs(targets.at_nodes - approx.evaluate(targets.nodes)).max()))
    return error


def _first_argmin(errors: Sequence[float]) -> int:
    best = 0
    for i, e in enumerate(errors):
        if e < errors[best]:
            best = i
    return best


def _shape_collection(collection: Union[int, Sequence[ShapeLike]], d: int) -> List[ShapeVector]:
    if isinstance(collection, (int, np.integer)):
        if collection < 0:
            raise ValueError(f"Empty shape list: budget {collection} is negative")
        return enumerate_shapes(int(collection), d)
    shapes = [as_shape(s) for s in collection]
    if not shapes:
        raise ValueError("Empty shape list")
    for s in shapes:
        if s.dim != d:
            raise DimensionMismatchError(f"Shape {s} does not match point dimension {d}")
    return shapes


def universal_vp_recover(
    lattice: PointSource,
    sampler: Sampler,
    n_budget: int,
    grid: Optional[EvaluationGrid] = None,
) -> RecoveryResult:
    """V^n: the kernel-convolution approximant over ||s||_1 = n_budget with the
    smallest uniform error. n_budget is n' on a Fibonacci lattice and l on a
    Korobov lattice."""
    ps = as_point_set(lattice)
    shapes = _shape_collection(n_budget, ps.dim)
    grid = grid or EvaluationGrid.for_shapes(shapes, ps.dim)
    targets = _targets(sampler, ps.coordinates, grid)
    budget = certified_budget(lattice)

    def fit(s: ShapeVector) -> Tuple[KernelSumApproximant, float]:
        approx = vs_apply(lattice, targets.at_nodes, s, budget=budget)
        return approx, _uniform_error(approx, targets, grid)

    outcomes = parallel_map(fit, shapes)
    errors = [e for _, e in outcomes]
    best = _first_argmin(errors)
    within = None
    if _is_lattice(lattice):
        within = budget is not None and n_budget <= budget
    logger.info(f"V^n on {ps.label}: chose {shapes[best]} with error {errors[best]:.3e}")
    return RecoveryResult(
        approximant=outcomes[best][0],
        chosen_shape=shapes[best],
        per_shape_errors=dict(zip(shapes, errors)),
        winner_error=errors[best],
        grid=grid,
        method="vp",
        lattice=ps.label,
        within_budget=within,
    )


@dataclass(frozen=True)
class ChebyshevFit:
    approximant: TrigApproximant
    residual: float
    rank_deficient: bool


def chebyshev_fit(
    points: Points,
    values: Sequence[float],
    s: ShapeLike,
    tolerance: Optional[float] = None,
) -> ChebyshevFit:
    """Discrete minimax fit from T(R(s)) on a node set.

    Solved as the linear program min t s.t. -t <= f(xi) - B c <= t over the real
    cosine/sine basis B. When B has a nontrivial kernel the minimizer is not
    unique; the kernel component is projected out, giving the minimum-norm
    optimal coefficients, and the fit is flagged.

    Raises:
        UnirecoverError: if the LP solver reports failure
    """
    coords = as_coordinates(points)
    s = as_shape(s)
    if coords.shape[0] < 1:
        raise ValueError("Minimax fit needs at least one node")
    if coords.shape[1] != s.dim:
        raise DimensionMismatchError(f"Shape {s} does not match point dimension {coords.shape[1]}")
    f = _finite_vector(values, coords.shape[0], "values")
    tolerance = tolerance or get_settings().minimax_tolerance

    basis = RealBasis.for_shape(s)
    B = basis.matrix(coords)
    p, n = B.shape
    scale = float(np.abs(f).max()) or 1.0
    target = f / scale

    ones = np.ones((p, 1))
    A_ub = np.vstack([np.hstack([B, -ones]), np.hstack([-B, -ones])])
    b_ub = np.concatenate([target, -target])
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    result = linprog(
        cost,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * n + [(0, None)],
        method="highs",
        options={
            "primal_feasibility_tolerance": tolerance,
            "dual_feasibility_tolerance": tolerance,
        },
    )
    if result.status != 0:
        raise UnirecoverError(f"Minimax solve failed for shape {s}: {result.message}")

    coefficients = result.x[:n]
    _, singular, vt = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(singular > singular[0] * max(p, n) * np.finfo(float).eps))
    if rank < n:
        logger.warning(f"Sampling map for {s} has rank {rank} < {n}; using minimum-norm fit")
        null = vt[rank:]
        coefficients = coefficients - null.T @ (null @ coefficients)

    coefficients = coefficients * scale
    residual = float(np.abs(f - B @ coefficients).max())
    return ChebyshevFit(
        approximant=TrigApproximant(basis=basis, coefficients=coefficients),
        residual=residual,
        rank_deficient=rank < n,
    )


def universal_cheb_recover(
    points: Points,
    sampler: Sampler,
    collection: Union[int, Sequence[ShapeLike]],
    grid: Optional[EvaluationGrid] = None,
    discretization_constant: Optional[float] = None,
) -> RecoveryResult:
    """l(xi, X): per-shape minimax fits on the nodes, keeping the one with the
    smallest uniform error. collection is a list of shapes or a weight n
    standing for every shape with ||s||_1 = n."""
    coords = as_coordinates(points)
    label = as_point_set(points).label if is_point_source(points) else "points"
    shapes = _shape_collection(collection, coords.shape[1])
    grid = grid or EvaluationGrid.for_shapes(shapes, coords.shape[1])
    targets = _targets(sampler, coords, grid)

    def fit(s: ShapeVector) -> Tuple[ChebyshevFit, float]:
        result = chebyshev_fit(coords, targets.at_nodes, s)
        return result, _uniform_error(result.approximant, targets, grid)

    outcomes = parallel_map(fit, shapes)
    errors = [e for _, e in outcomes]
    best = _first_argmin(errors)
    logger.info(f"l(xi,X) on {label}: chose {shapes[best]} with error {errors[best]:.3e}")
    return RecoveryResult(
        approximant=outcomes[best][0].approximant,
        chosen_shape=shapes[best],
        per_shape_errors=dict(zip(shapes, errors)),
        winner_error=errors[best],
        grid=grid,
        method="cheb",
        lattice=label,
        residuals={s: fit.residual for s, (fit, _) in zip(shapes, outcomes)},
        discretization_constant=discretization_constant,
    )

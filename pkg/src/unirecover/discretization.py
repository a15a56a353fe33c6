"""Empirical L-infinity universal discretization constants.

For a node set xi and a shape s, D(s) is the smallest D with
||t||_inf <= D max_nu |t(xi^nu)| for every t in T(R(s)). Random probing gives a
lower bound on D; the exact mode solves one LP per grid point for small shapes.
Uniform norms are taken over an EvaluationGrid united with the nodes, so every
measured ratio is at least 1.
"""

import logging
import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import linprog

from unirecover.basis import RealBasis
from unirecover.config import get_settings
from unirecover.errors import CapExceededError, DimensionMismatchError, UnirecoverError
from unirecover.lattices import as_point_set
from unirecover.recovery import EvaluationGrid, Points, as_coordinates, is_point_source
from unirecover.torus import ShapeLike, ShapeVector, as_shape, enumerate_shapes
from unirecover.utils import parallel_map

logger = logging.getLogger(__name__)


class DiscretizationReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    point_set: str
    n: int
    d: int
    per_shape: Dict[str, float]
    d_hat: float
    probes: int
    seed: int
    grid: Dict[str, Any]
    exact: bool = False

    @property
    def lower_bound(self) -> bool:
        """Probe estimates bound the true constant from below"""
        return not self.exact


def _label(points: Points) -> str:
    return as_point_set(points).label if is_point_source(points) else "points"


def _setup(points: Points, s: ShapeLike, grid: Optional[EvaluationGrid]):
    coords = as_coordinates(points)
    s = as_shape(s)
    if s.dim != coords.shape[1]:
        raise DimensionMismatchError(f"Shape {s} does not match point dimension {coords.shape[1]}")
    grid = grid or EvaluationGrid.for_shapes([s], s.dim)
    if grid.d != s.dim:
        raise DimensionMismatchError(f"Grid has dimension {grid.d}, shape {s} has {s.dim}")
    return coords, s, grid, RealBasis.for_shape(s)


def sampling_rank(basis: RealBasis, coords: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(basis.matrix(coords)))


def _grid_sup(basis: RealBasis, coefficients: np.ndarray, grid: EvaluationGrid) -> np.ndarray:
    """max over the tensor grid of |t_q| for each column q"""
    step = max(1, 2**22 // grid.size)
    sup = np.empty(coefficients.shape[1])
    for start in range(0, coefficients.shape[1], step):
        block = coefficients[:, start : start + step]
        values = basis.evaluate_grid(block, grid.resolution)
        sup[start : start + step] = np.abs(values.reshape(grid.size, -1)).max(axis=0)
    return sup


def _ratios(
    basis: RealBasis, coefficients: np.ndarray, coords: np.ndarray, grid: EvaluationGrid
) -> np.ndarray:
    node_max = np.abs(basis.matrix(coords) @ coefficients).max(axis=0)
    grid_max = _grid_sup(basis, coefficients, grid)
    if grid.include_nodes:
        grid_max = np.maximum(grid_max, node_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(node_max > 0, grid_max / node_max, np.inf)
    # the zero polynomial carries no information
    return np.where((node_max == 0) & (grid_max == 0), 1.0, ratios)


def estimate_discretization_constant(
    points: Points,
    s: ShapeLike,
    probes: Optional[int] = None,
    grid: Optional[EvaluationGrid] = None,
    seed: Optional[int] = None,
) -> float:
    """Largest grid-sup / node-max ratio over seeded random probes t in T(R(s)).

    Probe coefficients are standard normal, drawn from a stream seeded by
    (seed, s), so a run with more probes extends the one with fewer. Returns
    inf when the sampling map on the nodes has a nontrivial kernel.
    """
    settings = get_settings()
    probes = probes if probes is not None else settings.probes
    seed = seed if seed is not None else settings.seed
    if probes < 1:
        raise ValueError(f"Need at least one probe, got {probes}")
    coords, s, grid, basis = _setup(points, s, grid)

    rank = sampling_rank(basis, coords)
    if rank < basis.dim:
        logger.warning(f"Sampling map for {s} has rank {rank} < {basis.dim}: D = inf")
        return math.inf

    rng = np.random.default_rng(np.random.SeedSequence([seed, *s.entries]))
    coefficients = rng.standard_normal((probes, basis.dim)).T
    return float(_ratios(basis, coefficients, coords, grid).max())


def witness_ratio(
    points: Points,
    s: ShapeLike,
    coefficients: np.ndarray,
    grid: Optional[EvaluationGrid] = None,
) -> float:
    """grid-sup / node-max for one polynomial given in the real basis of T(R(s))"""
    coords, s, grid, basis = _setup(points, s, grid)
    coefficients = np.asarray(coefficients, dtype=np.float64).reshape(basis.dim, 1)
    return float(_ratios(basis, coefficients, coords, grid)[0])


def exact_discretization_constant(
    points: Points,
    s: ShapeLike,
    grid: Optional[EvaluationGrid] = None,
    tolerance: Optional[float] = None,
) -> float:
    """max over grid points x of max{t(x) : |t(xi^nu)| <= 1}, one LP per x.

    The feasible set is symmetric, so this is the sup of |t| and equals D(s)
    restricted to the grid.
    """
    settings = get_settings()
    tolerance = tolerance or settings.minimax_tolerance
    coords, s, grid, basis = _setup(points, s, grid)
    if basis.dim > settings.exact_mode_max_dim:
        raise CapExceededError(
            f"Exact mode needs |R(s)| <= {settings.exact_mode_max_dim}, {s} has {basis.dim}"
        )
    if sampling_rank(basis, coords) < basis.dim:
        return math.inf

    B = basis.matrix(coords)
    A_ub = np.vstack([B, -B])
    b_ub = np.ones(A_ub.shape[0])
    best = 1.0 if grid.include_nodes else 0.0
    for row in basis.matrix(grid.points()):
        result = linprog(
            -row,
            A_ub=A_ub,
            b_ub=b_ub,
            bounds=[(None, None)] * basis.dim,
            method="highs",
            options={
                "primal_feasibility_tolerance": tolerance,
                "dual_feasibility_tolerance": tolerance,
            },
        )
        if result.status == 3:
            return math.inf
        if result.status != 0:
            raise UnirecoverError(f"Discretization LP failed for shape {s}: {result.message}")
        best = max(best, -float(result.fun))
    return best


def certify_collection(
    points: Points,
    n: int,
    d: int,
    probes: Optional[int] = None,
    grid: Optional[EvaluationGrid] = None,
    seed: Optional[int] = None,
    exact: bool = False,
) -> DiscretizationReport:
    """D^ for every s with ||s||_1 = n; the collection constant is their max"""
    settings = get_settings()
    probes = probes if probes is not None else settings.probes
    seed = seed if seed is not None else settings.seed
    coords = as_coordinates(points)
    if coords.shape[1] != d:
        raise DimensionMismatchError(f"Points have dimension {coords.shape[1]}, expected {d}")
    shapes: List[ShapeVector] = enumerate_shapes(n, d)
    grid = grid or EvaluationGrid.for_shapes(shapes, d)

    if exact:
        values = parallel_map(lambda s: exact_discretization_constant(coords, s, grid), shapes)
    else:
        values = parallel_map(
            lambda s: estimate_discretization_constant(coords, s, probes, grid, seed), shapes
        )
    report = DiscretizationReport(
        point_set=_label(points),
        n=n,
        d=d,
        per_shape={str(s): v for s, v in zip(shapes, values)},
        d_hat=max(values),
        probes=0 if exact else probes,
        seed=seed,
        grid=grid.describe(),
        exact=exact,
    )
    logger.info(f"Discretization of {report.point_set} for H({n},{d}): D^ = {report.d_hat:.4g}")
    return report

"""Bench experiments: rate tables, Lebesgue-constant tables, exactness sweeps,
universality comparisons and discretization tables.

Each experiment is planned as an ordered list of row tasks plus a finalizer
that adds summary rows (slope fits, selector gaps). Rows run in parallel
through RowExecutor and come back in parameter order.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from unirecover.bench.config import ExperimentConfig, ExperimentKind, build_lattice
from unirecover.bench.executor import RowExecutor, RowTask
from unirecover.bench.records import ExperimentRecord, ExperimentRun, fit_slope
from unirecover.config import get_settings
from unirecover.cubature import fibonacci_certificate, lattice_certificate
from unirecover.discretization import certify_collection, witness_ratio
from unirecover.errors import ConfigError, MissingCertificateError
from unirecover.function_classes import (
    Generator,
    SmoothnessVector,
    TestFunction,
    best_approx_fit,
    make_test_function,
    parse_function_spec,
    random_trig_polynomial,
    trig_function,
)
from unirecover.lattices import (
    FibonacciLattice,
    KorobovLattice,
    PointSource,
    as_point_set,
    fibonacci_lattice,
    hammersley_net,
    is_prime,
    korobov_lattice,
    korobov_search,
    scale_to_torus,
)
from unirecover.recovery import (
    EvaluationGrid,
    certified_budget,
    chebyshev_fit,
    lebesgue_factor,
    lebesgue_vs,
    sample_grid,
    universal_cheb_recover,
    universal_vp_recover,
)
from unirecover.torus import enumerate_shapes, hyperbolic_cross_size

logger = logging.getLogger(__name__)

MAX_TRUNCATION = 2**20
Finalizer = Callable[[List[ExperimentRecord]], Tuple[List[ExperimentRecord], Dict[str, Any]]]


@dataclass
class Plan:
    tasks: List[RowTask]
    finalize: Optional[Finalizer] = None


def korobov_for_modulus(m: int, d: int) -> KorobovLattice:
    """Korobov lattice whose generator comes from the search at the largest N
    with d |Gamma(N, d)| < m - 1 (N = 1 when none qualifies)"""
    N = max(largest_guaranteed_N(m, d) or 1, 1)
    result = korobov_search(m, N, d)
    if not result.found:
        raise ValueError(f"No Korobov generator for m={m}, N={N}, d={d}")
    return korobov_lattice(m, result.generator)


def largest_guaranteed_N(m: int, d: int) -> Optional[int]:
    """Largest N with d |Gamma(N, d)| < m - 1, None when even N = 1 fails"""
    if d * hyperbolic_cross_size(1, d) >= m - 1:
        return None
    N = 1
    while d * hyperbolic_cross_size(N + 1, d) < m - 1:
        N += 1
    return N


def _sources(config: ExperimentConfig) -> List[Tuple[str, Callable[[], PointSource], Dict[str, Any]]]:
    """(row id, lazy builder, parameters) per node set, in parameter order"""
    if config.lattice == "fib":
        return [
            (f"fib:{n}", (lambda n=n: fibonacci_lattice(n)), {"lattice": f"fib:{n}", "n": n})
            for n in config.n_values
        ]
    if config.lattice == "korobov":
        moduli = config.m_values or [m for m in range(2, (config.m_max or 0) + 1) if is_prime(m)]
        if not moduli:
            raise ConfigError("A Korobov sweep needs m_values or m_max")
        return [
            (f"korobov:m={m}", (lambda m=m: korobov_for_modulus(m, config.d)), {"m": m, "d": config.d})
            for m in moduli
        ]
    if config.lattice == "hammersley":
        return [
            (
                f"hammersley:{n + 3}",
                (lambda n=n: scale_to_torus(hammersley_net(n + 3), label=f"hammersley:{n + 3}")),
                {"lattice": f"hammersley:{n + 3}", "n": n},
            )
            for n in config.n_values
        ]
    return [(config.lattice, lambda: build_lattice(config.lattice), {"lattice": config.lattice})]


def _size(source: PointSource) -> int:
    return as_point_set(source).size


def _is_lattice(source: PointSource) -> bool:
    return isinstance(source, (FibonacciLattice, KorobovLattice))


def _budget(config: ExperimentConfig, source: PointSource) -> Optional[int]:
    return config.budget if config.budget is not None else certified_budget(source)


def _grid(config: ExperimentConfig, budget: int, d: int) -> EvaluationGrid:
    return EvaluationGrid.for_shapes(enumerate_shapes(budget, d), d, config.oversampling)


# -- rates ------------------------------------------------------------------


def _with_truncation(f: TestFunction, K: int) -> TestFunction:
    return dataclasses.replace(f, truncation=K)


def _rates_plan(config: ExperimentConfig) -> Plan:
    fraction = get_settings().tail_fraction

    def row(build, params) -> List[ExperimentRecord]:
        lattice = build()
        d = as_point_set(lattice).dim
        f = parse_function_spec(config.function, d)
        budget = _budget(config, lattice)
        if budget is None:
            raise MissingCertificateError(f"{as_point_set(lattice).label} certifies no shape")
        grid = _grid(config, budget, d)
        result = universal_vp_recover(lattice, f, budget, grid)
        # deepen the truncation until its tail is negligible next to the error
        while f.tail_bound > fraction * result.winner_error and f.truncation < MAX_TRUNCATION:
            f = _with_truncation(f, 2 * f.truncation)
            result = universal_vp_recover(lattice, f, budget, grid)
        m = _size(lattice)
        values = {
            "m": m,
            "N": lattice_certificate(lattice).N_star if _is_lattice(lattice) else None,
            "budget": budget,
            "shape": str(result.chosen_shape),
            "error": result.winner_error,
            "K": f.truncation,
            "tail": f.tail_bound,
            "g": f.g,
            "usable": f.tail_bound <= fraction * result.winner_error,
        }
        return [ExperimentRecord(kind=config.kind, parameters=params, values=values)]

    # Korobov sweeps are fitted against the certified cross parameter, the rest against b_n
    axis = "N" if config.lattice == "korobov" else "m"

    def finalize(records: List[ExperimentRecord]):
        xs, ys = [], []
        for record in records:
            if record.status != "completed" or not record.values.get("usable"):
                continue
            if not record.values.get(axis):
                continue
            xs.append(math.log2(record.values[axis]))
            ys.append(math.log2(record.values["error"]))
            record.values["slope"] = fit_slope(xs, ys) if len(set(xs)) >= 2 else None
        if len(set(xs)) < 2:
            values = {"slope": None, "fit_axis": axis, "rows_fitted": len(xs)}
            if config.slope_range is None:
                return [], values
            summary = ExperimentRecord(
                kind=config.kind,
                parameters={"row": "slope"},
                values=values,
                passed=False,
                status="insufficient_data",
                error=f"{len(set(xs))} distinct usable {axis} values, need 2 for a slope",
            )
            return [summary], values
        slope = fit_slope(xs, ys)
        g = next(r.values["g"] for r in records if "g" in r.values)
        passed = None
        values = {"slope": slope, "expected_slope": -g, "fit_axis": axis, "rows_fitted": len(xs)}
        if config.slope_range is not None:
            lo, hi = config.slope_range
            values.update(slope_low=lo, slope_high=hi)
            passed = lo <= slope <= hi
        summary = ExperimentRecord(
            kind=config.kind, parameters={"row": "slope"}, values=values, passed=passed
        )
        return [summary], values

    return Plan([(rid, lambda b=b, p=p: row(b, p)) for rid, b, p in _sources(config)], finalize)


# -- lebesgue ---------------------------------------------------------------


def _lebesgue_plan(config: ExperimentConfig) -> Plan:
    def row(build, params) -> List[ExperimentRecord]:
        lattice = build()
        d = as_point_set(lattice).dim
        budget = _budget(config, lattice)
        if budget is None and not config.include_uncertified:
            return [
                ExperimentRecord(
                    kind=config.kind,
                    parameters={**params, "m": _size(lattice)},
                    passed=False,
                    status="skipped",
                    error=f"{as_point_set(lattice).label} certifies no shape",
                )
            ]
        top = -1 if budget is None else budget
        weights = list(range(top + 1)) + ([top + 1] if config.include_uncertified else [])
        records = []
        for weight in weights:
            certified = budget is not None and weight <= budget
            for s in enumerate_shapes(weight, d):
                grid = EvaluationGrid.for_shapes([s], d, config.oversampling)
                value = lebesgue_vs(lattice, s, grid)
                records.append(
                    ExperimentRecord.bounded(
                        config.kind,
                        {**params, "m": _size(lattice), "shape": str(s), "weight": weight},
                        {"value": value},
                        measured=value,
                        bound=float(lebesgue_factor(d)) if certified else None,
                    )
                )
        return records

    return Plan([(rid, lambda b=b, p=p: row(b, p)) for rid, b, p in _sources(config)])


# -- exactness --------------------------------------------------------------


def _certificate_values(lattice) -> Dict[str, Any]:
    cert = lattice_certificate(lattice)
    return {
        "m": cert.m,
        "h": cert.h,
        "N_star": cert.N_star,
        "gamma_hat": cert.gamma_hat,
        "budget": certified_budget(lattice),
        "first_aliased_mode": cert.first_aliased_mode,
    }


def _exactness_plan(config: ExperimentConfig) -> Plan:
    if config.lattice == "fib":

        def fib_row(n: int) -> List[ExperimentRecord]:
            cert = fibonacci_certificate(n)
            values = {
                "b_n": cert.m,
                "N_star": cert.N_star,
                "gamma_hat": cert.gamma_hat,
                "budget": certified_budget(fibonacci_lattice(n)),
                "first_aliased_mode": cert.first_aliased_mode,
            }
            return [ExperimentRecord(kind=config.kind, parameters={"n": n}, values=values)]

        def finalize(records: List[ExperimentRecord]):
            done = [r for r in records if r.status == "completed"]
            b = [r.values["b_n"] for r in done]
            gamma = [r.values["gamma_hat"] for r in done]
            summary = {
                "gamma_min": min(gamma) if gamma else None,
                "b_n_monotone": all(x < y for x, y in zip(b, b[1:])),
            }
            passed = bool(gamma) and summary["gamma_min"] > 0 and summary["b_n_monotone"]
            row = ExperimentRecord(
                kind=config.kind, parameters={"row": "summary"}, values=summary, passed=passed
            )
            return [row], summary

        tasks = [(f"fib:{n}", lambda n=n: fib_row(n)) for n in config.n_values]
        return Plan(tasks, finalize)

    if config.lattice == "korobov":
        moduli = config.m_values or [m for m in range(2, (config.m_max or 0) + 1) if is_prime(m)]
        if not moduli:
            raise ConfigError("A Korobov sweep needs m_values or m_max")

        def search_row(m: int) -> List[ExperimentRecord]:
            N = largest_guaranteed_N(m, config.d)
            params = {"m": m, "d": config.d}
            if N is None:
                values = {"N": None, "note": "no N satisfies d|Gamma(N,d)| < m-1"}
                return [ExperimentRecord(kind=config.kind, parameters=params, values=values)]
            # success at N carries over to every smaller N since Gamma(N', d) is contained in Gamma(N, d)
            result = korobov_search(m, N, config.d)
            values = {
                "N": N,
                "cross_size": result.cross_size,
                "prime": result.prime,
                "guaranteed": result.guaranteed,
                "h": result.h,
                "found": result.found,
            }
            passed = result.found if result.guaranteed else None
            return [
                ExperimentRecord(kind=config.kind, parameters=params, values=values, passed=passed)
            ]

        return Plan([(f"korobov:m={m}", lambda m=m: search_row(m)) for m in moduli])

    def single_row(build, params) -> List[ExperimentRecord]:
        lattice = build()
        if not isinstance(lattice, (FibonacciLattice, KorobovLattice)):
            raise ConfigError(f"{config.lattice} is not a lattice; exactness needs one")
        return [ExperimentRecord(kind=config.kind, parameters=params, values=_certificate_values(lattice))]

    return Plan([(rid, lambda b=b, p=p: single_row(b, p)) for rid, b, p in _sources(config)])


# -- universality -----------------------------------------------------------


def _random_functions(config: ExperimentConfig, n: int, d: int) -> List[TestFunction]:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, n, d]))
    shapes = enumerate_shapes(n, d)
    functions = []
    for i in range(config.random_functions):
        if i % 2 == 0:
            s = shapes[int(rng.integers(len(shapes)))]
            poly = random_trig_polynomial(s, rng)
            functions.append(trig_function(poly, label=f"trig:random{i}:{s}"))
        else:
            r = tuple(float(v) for v in rng.uniform(1.5, 3.0, d))
            alpha = tuple(float(v) for v in rng.uniform(0.0, 2.0, d))
            functions.append(make_test_function(SmoothnessVector(r, alpha), generator=Generator.SIGN))
    return functions


def _universality_plan(config: ExperimentConfig) -> Plan:
    if config.sweeps:
        raise ConfigError("Universality runs on a single point set, not a sweep")
    source = build_lattice(config.lattice)
    ps = as_point_set(source)
    d = ps.dim
    n = _budget(config, source)
    if n is None:
        raise ConfigError(f"{config.lattice} certifies no shape; set budget explicitly")
    grid = _grid(config, n, d)
    shapes = enumerate_shapes(n, d)

    if config.discretization_constant is not None:
        d_hat = config.discretization_constant
    else:
        d_hat = certify_collection(source, n, d, config.probes, grid, config.seed).d_hat
    if not math.isfinite(d_hat):
        raise MissingCertificateError(f"{ps.label} does not discretize H({n},{d}): D^ is infinite")

    functions = [parse_function_spec(spec, d) for spec in config.function_specs]
    functions += _random_functions(config, n, d)
    lattice_based = _is_lattice(source)
    vp_factor = lebesgue_factor(d) + 1

    def row(f: TestFunction) -> List[ExperimentRecord]:
        fits = [best_approx_fit(f, s, grid, source) for s in shapes]
        residuals = [fit.residual for fit in fits]
        best = int(np.argmin(residuals))
        min_best = residuals[best]
        scale = max(1.0, float(np.abs(sample_grid(f, grid)).max())) if f.node_values is None else 1.0
        params = {"function": f.label, "n": n}
        records = []

        cheb = universal_cheb_recover(source, f, shapes, grid, d_hat)
        node_values = f.node_values if f.node_values is not None else f.evaluate(ps.coordinates)
        u = chebyshev_fit(source, node_values, shapes[best]).approximant
        # the ratio attained by the difference that enters the triangle inequality; reported only
        witness = witness_ratio(source, shapes[best], fits[best].approximant.coefficients - u.coefficients, grid)
        records.append(
            ExperimentRecord.bounded(
                config.kind,
                {**params, "method": "cheb"},
                {
                    "shape": str(cheb.chosen_shape),
                    "error": cheb.winner_error,
                    "min_best": min_best,
                    "d_hat": d_hat,
                    "witness": witness,
                },
                measured=cheb.winner_error,
                bound=(2 * d_hat + 1) * min_best,
                slack=1e-8 * scale * (d_hat + 1),
            )
        )
        if lattice_based and f.node_values is None:
            vp = universal_vp_recover(source, f, n, grid)
            records.append(
                ExperimentRecord.bounded(
                    config.kind,
                    {**params, "method": "vp"},
                    {"shape": str(vp.chosen_shape), "error": vp.winner_error, "min_best": min_best},
                    measured=vp.winner_error,
                    bound=vp_factor * min_best,
                    slack=1e-8 * scale,
                )
            )
        records[0].values["per_shape_best"] = residuals
        return records

    def finalize(records: List[ExperimentRecord]):
        table = [r.values["per_shape_best"] for r in records if "per_shape_best" in r.values]
        for r in records:
            r.values.pop("per_shape_best", None)
        if not table:
            return [], {"d_hat": d_hat}
        matrix = np.asarray(table)
        sup_min = float(matrix.min(axis=1).max())
        min_sup = float(matrix.max(axis=0).min())
        summary = {"d_hat": d_hat, "sup_f_min_s": sup_min, "min_s_sup_f": min_sup}
        gap = ExperimentRecord.bounded(
            config.kind, {"row": "selector_gap"}, summary, measured=sup_min, bound=min_sup
        )
        return [gap], summary

    tasks = [(f"{i}:{f.label}", lambda f=f: row(f)) for i, f in enumerate(functions)]
    return Plan(tasks, finalize)


# -- discretization ---------------------------------------------------------


def _discretization_plan(config: ExperimentConfig) -> Plan:
    def row(build, params) -> List[ExperimentRecord]:
        source = build()
        ps = as_point_set(source)
        if config.lattice == "hammersley":
            n = params["n"]
        else:
            n = _budget(config, source)
        if n is None:
            raise MissingCertificateError(f"{ps.label} certifies no shape; set budget explicitly")
        grid = _grid(config, n, ps.dim)
        report = certify_collection(source, n, ps.dim, config.probes, grid, config.seed)
        values = {
            "m": ps.size,
            "budget": n,
            "d_hat": report.d_hat,
            "probes": report.probes,
            "per_shape": report.per_shape,
        }
        return [ExperimentRecord(kind=config.kind, parameters=params, values=values)]

    return Plan([(rid, lambda b=b, p=p: row(b, p)) for rid, b, p in _sources(config)])


_PLANNERS = {
    ExperimentKind.RATES: _rates_plan,
    ExperimentKind.LEBESGUE: _lebesgue_plan,
    ExperimentKind.EXACTNESS: _exactness_plan,
    ExperimentKind.UNIVERSALITY: _universality_plan,
    ExperimentKind.DISCRETIZATION: _discretization_plan,
}


def _finish(config: ExperimentConfig, plan: Plan, records: List[ExperimentRecord]) -> ExperimentRun:
    summary: Dict[str, Any] = {}
    if plan.finalize is not None:
        extra, summary = plan.finalize(records)
        records = records + extra
    run = ExperimentRun(config=config, records=records, summary=summary)
    logger.info(f"{config.kind.value}: {len(records)} rows, passed={run.passed}")
    return run


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentRun:
    plan = _PLANNERS[config.kind](config)
    records = RowExecutor(config.kind, threads).run_all(plan.tasks)
    return _finish(config, plan, records)


def iter_experiment(config: ExperimentConfig) -> Iterator[ExperimentRecord]:
    """Rows one task at a time, then the summary rows"""
    plan = _PLANNERS[config.kind](config)
    executor = RowExecutor(config.kind)
    records: List[ExperimentRecord] = []
    for row_id, task in plan.tasks:
        for record in executor.request_execution(row_id, task).records:
            records.append(record)
            yield record
    if plan.finalize is not None:
        extra, _ = plan.finalize(records)
        yield from extra


def _checked(config: ExperimentConfig, kind: ExperimentKind) -> ExperimentConfig:
    if config.kind != kind:
        raise ConfigError(f"Expected a {kind.value} config, got {config.kind.value}")
    return config


def run_rates(config: ExperimentConfig) -> ExperimentRun:
    return run_experiment(_checked(config, ExperimentKind.RATES))


def run_lebesgue(config: ExperimentConfig) -> ExperimentRun:
    return run_experiment(_checked(config, ExperimentKind.LEBESGUE))


def run_exactness(config: ExperimentConfig) -> ExperimentRun:
    return run_experiment(_checked(config, ExperimentKind.EXACTNESS))


def run_universality(config: ExperimentConfig) -> ExperimentRun:
    return run_experiment(_checked(config, ExperimentKind.UNIVERSALITY))


def run_discretization(config: ExperimentConfig) -> ExperimentRun:
    return run_experiment(_checked(config, ExperimentKind.DISCRETIZATION))

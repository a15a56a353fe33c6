from unirecover.bench.archive import RunArchive
from unirecover.bench.config import ExperimentConfig, ExperimentKind, build_lattice, load_config
from unirecover.bench.experiments import (
    iter_experiment,
    run_discretization,
    run_exactness,
    run_experiment,
    run_lebesgue,
    run_rates,
    run_universality,
)
from unirecover.bench.records import ExperimentRecord, ExperimentRun, to_csv, to_json, write_outputs

__all__ = [
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentRecord",
    "ExperimentRun",
    "RunArchive",
    "build_lattice",
    "iter_experiment",
    "load_config",
    "run_discretization",
    "run_exactness",
    "run_experiment",
    "run_lebesgue",
    "run_rates",
    "run_universality",
    "to_csv",
    "to_json",
    "write_outputs",
]

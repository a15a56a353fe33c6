import json
import re
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ValidationError, model_validator

from unirecover.errors import ConfigError
from unirecover.lattices import (
    FibonacciLattice,
    KorobovLattice,
    PointSet,
    fibonacci_lattice,
    korobov_lattice,
    read_point_file,
)

_FIB = re.compile(r"^fib:(\d+)$")
_KOROBOV = re.compile(r"^korobov:(\d+)((?:,\d+)+)$")


class ExperimentKind(str, Enum):
    RATES = "rates"
    LEBESGUE = "lebesgue"
    EXACTNESS = "exactness"
    UNIVERSALITY = "universality"
    DISCRETIZATION = "discretization"


class ExperimentConfig(BaseModel):
    """One bench run.

    lattice selects the node sets:
        "fib"                 Fibonacci sweep over n_min..n_max
        "fib:<n>"             one Fibonacci lattice
        "korobov"             Korobov sweep over m_values (generator searched, d from config)
        "korobov:<m>,<h...>"  one Korobov lattice
        "hammersley"          scaled Hammersley nets with 2^{n+3} points, n over n_min..n_max
        "file:<path>"         a point file
    """

    kind: ExperimentKind
    lattice: str = "fib"
    function: Optional[str] = None
    functions: List[str] = []
    random_functions: int = 0
    n_min: int = 8
    n_max: int = 12
    m_values: List[int] = []
    m_max: Optional[int] = None
    d: int = 2
    budget: Optional[int] = None
    oversampling: Optional[int] = None
    probes: Optional[int] = None
    seed: int = 0
    discretization_constant: Optional[float] = None
    include_uncertified: bool = False
    slope_range: Optional[Tuple[float, float]] = None
    output: Optional[str] = None

    @model_validator(mode="after")
    def check(self) -> "ExperimentConfig":
        if self.n_min > self.n_max:
            raise ValueError(f"Empty n range [{self.n_min}, {self.n_max}]")
        if self.d < 1:
            raise ValueError(f"Dimension must be >= 1, got {self.d}")
        if self.lattice.startswith("file:") and not Path(self.lattice[5:]).exists():
            raise ValueError(f"Point file {self.lattice[5:]} does not exist")
        for spec in self.function_specs:
            kind, _, body = spec.partition(":")
            if kind in ("trig", "samples") and not Path(body).exists():
                raise ValueError(f"File {body} referenced by {spec!r} does not exist")
        if self.kind == ExperimentKind.RATES and not self.function:
            raise ValueError("A rates experiment needs a bernoulli function spec")
        if self.kind == ExperimentKind.RATES and not self.function.startswith("bernoulli:"):
            raise ValueError(f"Rates need a bernoulli function spec, got {self.function!r}")
        if self.slope_range is not None and self.slope_range[0] > self.slope_range[1]:
            raise ValueError(f"Empty slope range {self.slope_range}")
        return self

    @property
    def function_specs(self) -> List[str]:
        return ([self.function] if self.function else []) + list(self.functions)

    @property
    def n_values(self) -> List[int]:
        return list(range(self.n_min, self.n_max + 1))

    @property
    def sweeps(self) -> bool:
        return self.lattice in ("fib", "korobov", "hammersley")


def load_config(source: Union[str, Path, dict]) -> ExperimentConfig:
    """Validate a config from a dict or a JSON file, raising ConfigError"""
    try:
        data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
        return ExperimentConfig(**data)
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Invalid experiment config: {e}") from e


def build_lattice(spec: str) -> Union[FibonacciLattice, KorobovLattice, PointSet]:
    """fib:<n> | korobov:<m>,<h_1>,...,<h_d> | file:<path>"""
    match = _FIB.match(spec)
    if match:
        return fibonacci_lattice(int(match.group(1)))
    match = _KOROBOV.match(spec)
    if match:
        h = [int(v) for v in match.group(2).split(",")[1:]]
        return korobov_lattice(int(match.group(1)), h)
    if spec.startswith("file:"):
        return read_point_file(spec[5:])
    raise ConfigError(f"Unknown lattice spec {spec!r}")

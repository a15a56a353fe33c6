import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from unirecover.bench.config import ExperimentConfig, ExperimentKind

SCHEMA_VERSION = "v1"


def schema_tag(kind: ExperimentKind) -> str:
    return f"unirecover/{kind.value}/{SCHEMA_VERSION}"


class ExperimentRecord(BaseModel):
    """One output row. passed is None for rows without a bound"""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    kind: ExperimentKind
    parameters: Dict[str, Any] = {}
    values: Dict[str, Any] = {}
    bound: Optional[float] = None
    passed: Optional[bool] = None
    status: str = "completed"
    error: Optional[str] = None
    wall_time: float = 0.0

    @classmethod
    def bounded(
        cls,
        kind: ExperimentKind,
        parameters: Dict[str, Any],
        values: Dict[str, Any],
        measured: float,
        bound: Optional[float],
        slack: float = 0.0,
    ) -> "ExperimentRecord":
        """Row whose pass flag is measured <= bound (+ slack); no flag when bound is None"""
        passed = None if bound is None else bool(measured <= bound + slack)
        return cls(kind=kind, parameters=parameters, values=values, bound=bound, passed=passed)

    def flat(self) -> Dict[str, Any]:
        row = {**self.parameters, **self.values, "bound": self.bound, "pass": self.passed}
        row.update(status=self.status, error=self.error, wall_time=self.wall_time)
        return row


@dataclass
class ExperimentRun:
    config: ExperimentConfig
    records: List[ExperimentRecord]
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> ExperimentKind:
        return self.config.kind

    @property
    def failed_rows(self) -> List[ExperimentRecord]:
        return [r for r in self.records if r.status != "completed" or r.passed is False]

    @property
    def passed(self) -> bool:
        return not self.failed_rows

    def header(self) -> List[str]:
        columns: List[str] = []
        for record in self.records:
            for key in record.flat():
                if key not in columns:
                    columns.append(key)
        return columns


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    return value


def to_csv(run: ExperimentRun) -> str:
    buffer = io.StringIO()
    buffer.write(f"# {schema_tag(run.kind)}\n")
    header = run.header()
    writer = csv.DictWriter(buffer, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for record in run.records:
        writer.writerow({k: _cell(v) for k, v in record.flat().items()})
    return buffer.getvalue()


def to_json(run: ExperimentRun) -> str:
    payload = {
        "schema": schema_tag(run.kind),
        "config": run.config.model_dump(mode="json"),
        "rows": [json.loads(r.model_dump_json()) for r in run.records],
        "summary": run.summary,
        "passed": run.passed,
    }
    return json.dumps(payload, indent=2)


def write_outputs(run: ExperimentRun, path: Union[str, Path]) -> List[Path]:
    """Write <stem>.csv and <stem>.json next to path"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
    csv_path.write_text(to_csv(run))
    json_path.write_text(to_json(run))
    return [csv_path, json_path]


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Ordinary least-squares slope of ys against xs"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or np.ptp(xs) == 0:
        raise ValueError(f"Slope fit needs two distinct abscissae, got {xs.tolist()}")
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)

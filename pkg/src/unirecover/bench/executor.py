import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from unirecover.bench.config import ExperimentKind
from unirecover.bench.records import ExperimentRecord
from unirecover.utils import parallel_map

logger = logging.getLogger(__name__)

RowTask = Tuple[str, Callable[[], List[ExperimentRecord]]]


class ExecutionStatus(Enum):
    """Status of a row computation"""

    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ExecutionResult:
    status: ExecutionStatus
    records: List[ExperimentRecord] = field(default_factory=list)
    error: Optional[str] = None


class RowExecutor:
    """Runs experiment row tasks, caching results by row id.

    A task that raises is recorded as FAILED with a single failed record, so
    one bad row never aborts the rest of the sweep.
    """

    def __init__(self, kind: ExperimentKind, threads: Optional[int] = None):
        self.kind = kind
        self.threads = threads
        self.cache: Dict[str, ExecutionResult] = {}

    def get(self, row_id: str) -> Optional[ExecutionResult]:
        return self.cache.get(row_id)

    def request_execution(
        self, row_id: str, task: Callable[[], List[ExperimentRecord]]
    ) -> ExecutionResult:
        if row_id in self.cache and self.cache[row_id].status != ExecutionStatus.RUNNING:
            return self.cache[row_id]

        self.cache[row_id] = ExecutionResult(status=ExecutionStatus.RUNNING)
        start = time.perf_counter()
        try:
            records = task()
            elapsed = time.perf_counter() - start
            for record in records:
                record.wall_time = elapsed / max(len(records), 1)
            result = ExecutionResult(status=ExecutionStatus.COMPLETED, records=records)
        except Exception as e:
            logger.error(f"Row {row_id} failed: {e}")
            failed = ExperimentRecord(
                kind=self.kind,
                parameters={"row": row_id},
                status=ExecutionStatus.FAILED.value,
                error=str(e),
                wall_time=time.perf_counter() - start,
            )
            result = ExecutionResult(status=ExecutionStatus.FAILED, records=[failed], error=str(e))

        self.cache[row_id] = result
        return result

    def run_all(self, tasks: Sequence[RowTask]) -> List[ExperimentRecord]:
        """Execute in parallel; records come back in task order"""
        results = parallel_map(lambda t: self.request_execution(*t), tasks, self.threads)
        return [record for result in results for record in result.records]

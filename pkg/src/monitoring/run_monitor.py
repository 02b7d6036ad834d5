"""
Run monitoring for solver, engine and simulation runs.

Every run is bracketed by start_operation / end_operation. The monitor keeps
wall times, per-kind success counts and the headline numbers of each run, and
condenses them into the status object written next to every result table.
"""

import logging
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """One finished run."""

    operation_id: str
    kind: str
    wall_time_ms: float
    success: bool
    timestamp: datetime
    context: Dict[str, Any]
    result_data: Dict[str, Any]
    error_info: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "operation_id": self.operation_id,
            "kind": self.kind,
            "wall_time_ms": self.wall_time_ms,
            "success": self.success,
            "timestamp": self.timestamp.isoformat(),
            "context": self.context,
            "result_data": self.result_data,
            "error_info": self.error_info,
        }


class RunMonitor:
    """Collects run outcomes for one CLI invocation."""

    def __init__(self, buffer_size: int = 10_000):
        self.records: deque = deque(maxlen=buffer_size)
        self.active_operations: Dict[str, Dict[str, Any]] = {}
        self.kind_stats: Dict[str, Dict[str, Any]] = defaultdict(lambda: {
            "total_runs": 0,
            "successful_runs": 0,
            "failed_runs": 0,
            "total_wall_time_ms": 0.0,
            "error_types": defaultdict(int),
        })
        self.thresholds = {
            "max_wall_time_ms": 60_000.0,
            "max_sweeps": 1_000,
        }
        self._started = time.perf_counter()

    def start_operation(self, operation_id: str, kind: str, context: Dict[str, Any] = None) -> None:
        self.active_operations[operation_id] = {
            "kind": kind,
            "start_time": time.perf_counter(),
            "context": context or {},
        }
        logger.debug(f"Started run {operation_id} ({kind})")

    def end_operation(
        self,
        operation_id: str,
        success: bool,
        result_data: Dict[str, Any] = None,
        error_info: str = None,
    ) -> Optional[RunRecord]:
        if operation_id not in self.active_operations:
            logger.warning(f"Run {operation_id} not found in active operations")
            return None

        operation = self.active_operations.pop(operation_id)
        wall_ms = (time.perf_counter() - operation["start_time"]) * 1000.0
        kind = operation["kind"]

        stats = self.kind_stats[kind]
        stats["total_runs"] += 1
        stats["total_wall_time_ms"] += wall_ms
        if success:
            stats["successful_runs"] += 1
        else:
            stats["failed_runs"] += 1
            if error_info:
                stats["error_types"][error_info.split(":")[0]] += 1

        record = RunRecord(
            operation_id=operation_id,
            kind=kind,
            wall_time_ms=wall_ms,
            success=success,
            timestamp=datetime.now(),
            context=operation["context"],
            result_data=result_data or {},
            error_info=error_info,
        )
        self.records.append(record)
        self._check_thresholds(record)
        logger.debug(f"Completed run {operation_id}: {wall_ms:.1f}ms, success={success}")
        return record

    def _check_thresholds(self, record: RunRecord) -> None:
        if record.wall_time_ms > self.thresholds["max_wall_time_ms"]:
            logger.warning(f"Slow {record.kind} run {record.operation_id}: {record.wall_time_ms:.0f}ms")
        sweeps = record.result_data.get("sweeps")
        if sweeps is not None and sweeps > self.thresholds["max_sweeps"]:
            logger.warning(f"{record.kind} run {record.operation_id} needed {sweeps} sweeps")

    @property
    def failures(self) -> List[RunRecord]:
        return [r for r in self.records if not r.success]

    def status_summary(self) -> Dict[str, Any]:
        """{status, sweeps, residual, wall_time_ms, runs, failures} over all recorded runs."""
        runs = list(self.records)
        sweeps = [r.result_data["sweeps"] for r in runs if "sweeps" in r.result_data]
        residuals = [r.result_data["residual"] for r in runs if "residual" in r.result_data]
        return {
            "status": "ok" if runs and not self.failures else ("empty" if not runs else "failed"),
            "sweeps": max(sweeps) if sweeps else 0,
            "residual": max(residuals) if residuals else 0.0,
            "wall_time_ms": (time.perf_counter() - self._started) * 1000.0,
            "runs": len(runs),
            "failures": [
                {"operation_id": r.operation_id, "kind": r.kind, "error": r.error_info}
                for r in self.failures
            ],
        }

    def get_real_time_stats(self) -> Dict[str, Any]:
        return {
            "active_operations": len(self.active_operations),
            "runs_recorded": len(self.records),
            "by_kind": {
                kind: {
                    "total_runs": s["total_runs"],
                    "failed_runs": s["failed_runs"],
                    "average_wall_time_ms": s["total_wall_time_ms"] / s["total_runs"] if s["total_runs"] else 0.0,
                }
                for kind, s in self.kind_stats.items()
            },
        }

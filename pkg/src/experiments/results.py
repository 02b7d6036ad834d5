"""Result tables and their CSV / JSON emission."""

import json
import logging
import math
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .. import __version__
from ..model.exceptions import DomainError

logger = logging.getLogger(__name__)

NA = "n/a"


@lru_cache(maxsize=1)
def artifact_version() -> str:
    """`git describe` of the checkout, or the package version outside a repository."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        described = out.stdout.strip()
        if described:
            return described
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


@dataclass
class ResultTable:
    name: str
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def create(cls, name: str, columns: Sequence[str], seed: int, **extra: Any) -> "ResultTable":
        metadata = {
            "version": artifact_version(),
            "seed": seed,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        metadata.update(extra)
        return cls(name=name, columns=list(columns), metadata=metadata)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise DomainError(
                f"table {self.name}: row has {len(values)} values for {len(self.columns)} columns"
            )
        self.rows.append(list(values))

    def column(self, name: str) -> List[Any]:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)

    def to_csv(self) -> str:
        frame = self.to_frame().replace([math.inf, -math.inf], math.nan)
        return frame.to_csv(index=False, na_rep=NA, lineterminator="\n")

    def to_json(self) -> str:
        records = [dict(zip(self.columns, row)) for row in self.rows]
        return json.dumps(_json_safe({"name": self.name, "columns": self.columns, "rows": records}), indent=2)

    def write(self, out_dir: Path, fmt: str = "csv", status: Optional[Dict[str, Any]] = None) -> Path:
        """Write the table plus a `<name>.meta.json` with metadata and run status."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            path = out_dir / f"{self.name}.csv"
            path.write_text(self.to_csv(), encoding="utf-8")
        elif fmt == "json":
            path = out_dir / f"{self.name}.json"
            path.write_text(self.to_json(), encoding="utf-8")
        else:
            raise DomainError(f"unknown output format '{fmt}'")
        meta = {"metadata": self.metadata, "status": status or {}}
        (out_dir / f"{self.name}.meta.json").write_text(
            json.dumps(_json_safe(meta), indent=2, default=str), encoding="utf-8"
        )
        logger.info(f"wrote {len(self.rows)} rows to {path}")
        return path

"""Equilibrium results shared by the closed-form solvers and the best-response engine."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Sequence, Union

from ..model.costs import OffloadVector

Price = Union[float, List[float]]


class EquilibriumKind(str, Enum):
    NE = "NE"
    SE = "SE"
    REGULATED_NE = "RegulatedNE"


@dataclass
class TraceRow:
    """One sweep of an iterative solver."""

    sweep: int
    mean_x: float
    delta_x: float

    def to_dict(self) -> Dict[str, Any]:
        return {"sweep": self.sweep, "mean_x": self.mean_x, "delta_x": self.delta_x}


@dataclass
class EquilibriumResult:
    """Solution vector of an offloading game plus how it was obtained."""

    x_star: OffloadVector
    kind: EquilibriumKind
    price: Price = 0.0
    residual: float = 0.0
    iterations: int = 0
    trace: List[TraceRow] = field(default_factory=list)
    trivial: bool = False
    certification_gap: float = 0.0

    @property
    def sweeps(self) -> int:
        return len(self.trace)

    @property
    def mean_x(self) -> float:
        return self.x_star.mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x_star": self.x_star.to_list(),
            "kind": self.kind.value,
            "price": self.price,
            "residual": self.residual,
            "iterations": self.iterations,
            "sweeps": self.sweeps,
            "trivial": self.trivial,
            "certification_gap": self.certification_gap,
            "trace": [row.to_dict() for row in self.trace],
        }


def price_for(price: Union[float, Sequence[float]], k: int) -> float:
    """Price charged to user k under a scalar or per-user price."""
    if isinstance(price, (int, float)):
        return float(price)
    return float(price[k])

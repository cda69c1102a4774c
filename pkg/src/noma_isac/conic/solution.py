from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass
class ConicSolution:
    status: SolveStatus
    x: np.ndarray | None
    objective: float
    values: dict = field(default_factory=dict)
    max_violation: float = float("nan")
    tolerance: float = float("nan")
    iterations: int = 0
    backend: str = ""
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

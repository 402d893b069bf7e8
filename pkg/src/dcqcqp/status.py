from __future__ import annotations

import enum
from dataclasses import dataclass


class StatusKind(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolveStatus:
    kind: StatusKind
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.kind is StatusKind.OPTIMAL

    def __str__(self):
        return f"{self.kind.value}: {self.message}" if self.message else self.kind.value


class PreconditionError(ValueError):
    """An input violates an assumption the algorithm relies on."""


class SolverFailure(RuntimeError):
    def __init__(self, status: SolveStatus, partial=None):
        super().__init__(str(status))
        self.status = status
        self.partial = partial

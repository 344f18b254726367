from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.common import ComplexArray
from app.models.state import UnitaryOp


class GramSearchProblem(BaseModel):
    """Is there a unit vector chi making {U_k chi} orthonormal?"""

    unitaries: list[UnitaryOp] = Field(..., min_length=2)
    d: int = Field(..., ge=2)
    name: str = ""

    @model_validator(mode="after")
    def _check_dimensions(self):
        dims = {u.dim for u in self.unitaries}
        if dims != {self.d}:
            raise ValueError(f"all unitaries must act on C^{self.d}, got dimensions {sorted(dims)}")
        return self


class GramSearchResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    problem: str = ""
    best_chi: ComplexArray = Field(
        ..., description="Best unit vector found; a witness when Feasible"
    )
    best_objective: float = Field(..., ge=0.0)
    restarts: int = Field(..., ge=1)
    restart_minima: list[float]
    iterations: list[int] = Field(default_factory=list, description="Iterations used per restart")
    seed: int | None = None
    tolerance: float
    verdict: Literal["Feasible", "NoWitnessFound"]
    note: str = ""

    @model_validator(mode="after")
    def _check_best(self):
        if len(self.restart_minima) != self.restarts:
            raise ValueError("one minimum per restart is required")
        if self.best_objective != min(self.restart_minima):
            raise ValueError("best_objective must be the smallest restart minimum")
        return self

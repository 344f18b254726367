import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.models.protocol import TranscriptEntry
from app.models.state import Bipartition, PureState
from app.services import qcore


class CatalyticBudget(BaseModel):
    """Entanglement borrowed from a supplier (delta) and promised back (epsilon)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    supplied_ebits: float = Field(..., ge=0.0, description="delta")
    returned_ebits: float = Field(..., ge=0.0, description="epsilon")
    resources: list[PureState] = Field(
        default_factory=list, description="Two-qubit states prepended to the instance"
    )

    @model_validator(mode="after")
    def _check_supply(self):
        total = 0.0
        for r in self.resources:
            if r.n_factors != 2:
                raise ValueError(f"a resource must be a two-factor pair, got dims {list(r.dims)}")
            total += qcore.entanglement_entropy(r, Bipartition.of([0], 2))
        if abs(total - self.supplied_ebits) > np.sqrt(settings.NORM_TOL):
            raise ValueError(
                f"supplied_ebits={self.supplied_ebits} but the resources carry {total:.6f} ebits"
            )
        return self


class LeafRecord(BaseModel):
    assignment: tuple[int, ...]
    probability: float = Field(..., description="Branch probability given the assignment")
    weight: float = Field(..., description="probability / number of assignments")
    residual_ebits: float = Field(..., ge=0.0, description="Alice|Bob entropy at the leaf")
    slot_residuals: dict[int, float] = Field(
        default_factory=dict, description="Entropy of each slot still unentangled with the rest"
    )
    verdict: dict[int, int]
    correct: bool
    transcript: tuple[TranscriptEntry, ...] = ()


class AssignmentResult(BaseModel):
    assignment: tuple[int, ...]
    success_probability: float
    n_leaves: int
    mislabeled_leaves: int = 0


class MarkingVerdict(BaseModel):
    assignments: list[AssignmentResult]
    perfect: bool

    @property
    def failures(self) -> list[AssignmentResult]:
        return [
            a
            for a in self.assignments
            if a.mislabeled_leaves or a.success_probability < 1 - settings.NORM_TOL
        ]


class EntanglementLedger(BaseModel):
    leaves: list[LeafRecord]
    average_residual_ebits: float = Field(..., ge=0.0)
    min_residual_ebits: float = Field(..., ge=0.0)
    max_residual_ebits: float = Field(..., ge=0.0)
    budget: CatalyticBudget | None = None
    returned_ebits: float | None = Field(None, description="epsilon achieved on every leaf")
    surplus_ebits: float | None = Field(
        None, description="Residual left after returning epsilon, on the poorest leaf"
    )
    consumed_ebits: float | None = Field(None, description="delta - epsilon")

    def residuals_for(self, assignment) -> list[float]:
        assignment = tuple(assignment)
        return [leaf.residual_ebits for leaf in self.leaves if leaf.assignment == assignment]

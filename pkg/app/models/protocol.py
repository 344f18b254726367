"""LOCC protocol trees and their execution records.

A protocol is a finite tree. Inner nodes are local steps owned by one party (or, for
CorrelatedMeasure, a pair of single-qubit measurements on two parties whose outcomes are
compared over the classical channel). Leaves are Conclude nodes.
"""

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.models.common import ComplexArray
from app.models.state import PartyLayout, PureState, UnitaryOp


# ============================================================================
# Protocol nodes
# ============================================================================


class LocalMeasure(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: Literal["measure"] = "measure"
    id: str = ""
    party: str
    factors: tuple[int, ...]
    basis: str = Field("Z", description='Named basis: "Z", "X" or "bell"')
    basis_matrix: ComplexArray | None = Field(
        None, description="Explicit basis (columns); outcomes are labelled '0'..'D-1'"
    )
    children: dict[str, "ProtocolNode"]


class LocalUnitary(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: Literal["unitary"] = "unitary"
    id: str = ""
    party: str
    factors: tuple[int, ...]
    u: UnitaryOp
    child: "ProtocolNode"


class Teleport(BaseModel):
    """Move the qubit on `source_factor` onto the receiver's half of a shared pair."""

    kind: Literal["teleport"] = "teleport"
    id: str = ""
    sender: str
    receiver: str
    source_factor: int
    resource_factors: tuple[int, int] = Field(
        ..., description="(sender-side factor, receiver-side factor) of the shared pair"
    )
    resource_slot: int | None = Field(
        None, description="Layout slot the shared pair must sit in; negative for supplied pairs"
    )
    child: "ProtocolNode"


class CorrelatedMeasure(BaseModel):
    """Both parties measure one qubit in the same Pauli basis; C = equal outcomes, AC = unequal."""

    kind: Literal["correlated"] = "correlated"
    id: str = ""
    party_a: str
    factor_a: int
    party_b: str
    factor_b: int
    pauli: Literal["X", "Z"]
    children: dict[Literal["C", "AC"], "ProtocolNode"]


class LocalPrepare(BaseModel):
    """Replace consumed factors of one party by a fresh local state."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: Literal["prepare"] = "prepare"
    id: str = ""
    party: str
    factors: tuple[int, ...]
    state: PureState
    child: "ProtocolNode"


class Conclude(BaseModel):
    kind: Literal["conclude"] = "conclude"
    id: str = ""
    assignment: dict[int, int] = Field(..., description="slot -> state index")

    @model_validator(mode="after")
    def _check_injective(self):
        if len(set(self.assignment.values())) != len(self.assignment):
            raise ValueError(f"conclusion {self.assignment} assigns one state to two slots")
        return self


ProtocolNode = Annotated[
    LocalMeasure | LocalUnitary | Teleport | CorrelatedMeasure | LocalPrepare | Conclude,
    Field(discriminator="kind"),
]

for _node in (LocalMeasure, LocalUnitary, Teleport, CorrelatedMeasure, LocalPrepare, Conclude):
    _node.model_rebuild()


class ProtocolDocument(BaseModel):
    """Top-level JSON wrapper for a protocol tree."""

    root: ProtocolNode


# ============================================================================
# Execution records
# ============================================================================


class TranscriptEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    node_id: str
    party: str
    outcome: str | None = Field(None, description="Announced outcome; None for unitaries")


class BranchOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    probability: float = Field(..., gt=0.0, le=1.0 + 1e-9)
    transcript: tuple[TranscriptEntry, ...]
    final_state: PureState
    verdict: dict[int, int]


class BranchTree(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    input_dims: tuple[int, ...]
    layout: PartyLayout
    leaves: list[BranchOutcome]

    @model_validator(mode="after")
    def _check_total_probability(self):
        total = sum(leaf.probability for leaf in self.leaves)
        if abs(total - 1.0) > settings.NORM_TOL:
            raise ValueError(f"leaf probabilities sum to {total!r}, not 1")
        return self

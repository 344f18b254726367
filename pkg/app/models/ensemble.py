import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from app.core.config import settings
from app.models.state import PartyLayout, PureState


class StateSet(BaseModel):
    """A known set of pure states, all sharing one single-slot factor layout."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    states: list[PureState] = Field(..., min_length=1)
    layout: PartyLayout = Field(..., description="Layout of one member (slot 0)")
    labels: list[str] | None = Field(None, description="Optional per-member labels")
    pairwise_orthogonal: bool = True

    @model_validator(mode="after")
    def _check_members(self):
        dims = self.states[0].dims
        if any(s.dims != dims for s in self.states):
            raise ValueError(f"members of '{self.name}' do not share one factor structure")
        if len(dims) != self.layout.n_factors:
            raise ValueError(
                f"layout describes {self.layout.n_factors} factors but members have {len(dims)}"
            )
        if self.labels is not None and len(self.labels) != len(self.states):
            raise ValueError("one label per member is required")
        if self.pairwise_orthogonal:
            gram = self.gram()
            off = np.abs(gram - np.diag(np.diag(gram))).max(initial=0.0)
            if off > settings.NORM_TOL:
                raise ValueError(
                    f"members of '{self.name}' are not pairwise orthogonal (max overlap {off:.3e})"
                )
        return self

    @property
    def size(self) -> int:
        return len(self.states)

    @computed_field
    @property
    def dims(self) -> tuple[int, ...]:
        return self.states[0].dims

    def gram(self) -> np.ndarray:
        vectors = np.stack([s.amps for s in self.states], axis=1)
        return vectors.conj().T @ vectors


class MarkingInstance(BaseModel):
    """m states drawn from a set, one per slot, in the hidden order `hidden_assignment`."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    source: StateSet
    m: int = Field(..., ge=1)
    hidden_assignment: tuple[int, ...]
    composite: PureState
    layout: PartyLayout

    @model_validator(mode="after")
    def _check_assignment(self):
        if self.m > self.source.size:
            raise ValueError(f"m={self.m} exceeds the set size {self.source.size}")
        if len(self.hidden_assignment) != self.m:
            raise ValueError("hidden assignment must name one state per slot")
        if len(set(self.hidden_assignment)) != self.m:
            raise ValueError("hidden assignment repeats a state")
        if any(i < 0 or i >= self.source.size for i in self.hidden_assignment):
            raise ValueError("hidden assignment index out of range")
        return self


class RateReport(BaseModel):
    n: int = Field(..., ge=1)
    d: int = Field(..., ge=2)
    k: int = Field(..., ge=1)
    lsd_rate: float = Field(..., ge=0.0, description="log2(n)/k bits per qudit")
    lsm_rate: float = Field(..., ge=0.0, description="log2(n!)/n bits per qudit")


class CountingReport(BaseModel):
    """Counting argument: more maximally entangled states than the local dimension."""

    set_name: str
    m: int
    ensemble_size: int
    local_dimension: int = Field(..., description="Dimension of one party's share of an m-tuple")
    all_maximally_entangled: bool
    bound_applies: bool = Field(
        ..., description="True when the ensemble is provably not locally distinguishable"
    )
    note: str = ""

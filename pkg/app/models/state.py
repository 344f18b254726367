"""Pure-state, local-operator and party-layout models."""

from math import prod

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.models.common import ComplexArray
from app.utils.exceptions import InvalidArgument


class PureState(BaseModel):
    """Dense normalized amplitude vector over an explicit tensor-factor structure."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    amps: ComplexArray = Field(..., description="Amplitudes in row-major factor order")
    dims: tuple[int, ...] = Field(..., description="Factor dimensions, each >= 2")

    @model_validator(mode="after")
    def _check_invariants(self):
        if not self.dims:
            raise ValueError("a state needs at least one factor")
        if any(d < 2 for d in self.dims):
            raise ValueError(f"factor dimensions must be >= 2, got {list(self.dims)}")
        if self.amps.ndim != 1 or self.amps.shape[0] != prod(self.dims):
            raise ValueError(
                f"amplitude length {self.amps.size} does not match dims {list(self.dims)}"
            )
        norm = float(np.linalg.norm(self.amps))
        if abs(norm - 1.0) > settings.NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        return self

    @property
    def dim(self) -> int:
        return self.amps.shape[0]

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    def as_tensor(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def __eq__(self, other):
        if not isinstance(other, PureState):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.amps, other.amps)

    __hash__ = None


class UnitaryOp(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: ComplexArray
    dim: int = Field(..., ge=2)
    label: str = ""

    @model_validator(mode="after")
    def _check_unitary(self):
        if self.matrix.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {self.matrix.shape} is not {self.dim}x{self.dim}")
        deviation = np.abs(self.matrix.conj().T @ self.matrix - np.eye(self.dim)).max()
        if deviation > settings.NORM_TOL:
            raise ValueError(f"matrix is not unitary (max |U^dag U - I| = {deviation:.3e})")
        return self

    @classmethod
    def of(cls, matrix, label: str = "") -> "UnitaryOp":
        matrix = np.asarray(matrix, dtype=complex)
        return cls(matrix=matrix, dim=matrix.shape[0], label=label)

    def __eq__(self, other):
        if not isinstance(other, UnitaryOp):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


class Bipartition(BaseModel):
    model_config = ConfigDict(frozen=True)

    left: tuple[int, ...]
    right: tuple[int, ...]

    @model_validator(mode="after")
    def _check_partition(self):
        if not self.left or not self.right:
            raise ValueError("both sides of a cut must be non-empty")
        if set(self.left) & set(self.right):
            raise ValueError("the two sides of a cut overlap")
        return self

    @classmethod
    def of(cls, left, n_factors: int) -> "Bipartition":
        left = tuple(sorted(set(left)))
        right = tuple(i for i in range(n_factors) if i not in left)
        if not left or not right:
            raise InvalidArgument(f"trivial cut {list(left)}|{list(right)}")
        return cls(left=left, right=right)

    def covers(self, n_factors: int) -> bool:
        return sorted(self.left + self.right) == list(range(n_factors))


class PartyLayout(BaseModel):
    """Which party holds each factor, which slot it belongs to and its part within the slot.

    Instance slots are numbered 0..m-1; supplied resource pairs use negative slot numbers.
    """

    model_config = ConfigDict(frozen=True)

    factor_party: tuple[str, ...]
    factor_slot: tuple[int, ...]
    factor_role: tuple[str, ...]

    @model_validator(mode="after")
    def _check_lengths(self):
        n = len(self.factor_party)
        if n == 0:
            raise ValueError("layout has no factors")
        if len(self.factor_slot) != n or len(self.factor_role) != n:
            raise ValueError("factor_party, factor_slot and factor_role differ in length")
        return self

    @property
    def n_factors(self) -> int:
        return len(self.factor_party)

    @property
    def parties(self) -> list[str]:
        return list(dict.fromkeys(self.factor_party))

    @property
    def slots(self) -> list[int]:
        return sorted(s for s in set(self.factor_slot) if s >= 0)

    def factors_of(self, party: str) -> list[int]:
        return [i for i, p in enumerate(self.factor_party) if p == party]

    def factors_in_slot(self, slot: int) -> list[int]:
        return [i for i, s in enumerate(self.factor_slot) if s == slot]

    def factor(self, slot: int, party: str, role: str) -> int:
        matches = [
            i
            for i in range(self.n_factors)
            if self.factor_slot[i] == slot
            and self.factor_party[i] == party
            and self.factor_role[i] == role
        ]
        if len(matches) != 1:
            raise InvalidArgument(
                f"expected one factor for slot={slot} party={party!r} role={role!r}, "
                f"found {len(matches)}"
            )
        return matches[0]

    def cut(self, party: str) -> Bipartition:
        """The `party` vs everyone-else cut."""
        return Bipartition.of(self.factors_of(party), self.n_factors)

    def slot_layout(self, slot: int) -> "PartyLayout":
        """Layout of a single slot, renumbered as slot 0."""
        idx = self.factors_in_slot(slot)
        return PartyLayout(
            factor_party=tuple(self.factor_party[i] for i in idx),
            factor_slot=tuple(0 for _ in idx),
            factor_role=tuple(self.factor_role[i] for i in idx),
        )

    @classmethod
    def concat(cls, layouts: list["PartyLayout"], slots: list[int]) -> "PartyLayout":
        """Stack single-slot layouts in order, assigning each the given slot number."""
        parties, slot_ids, roles = [], [], []
        for layout, slot in zip(layouts, slots, strict=True):
            parties.extend(layout.factor_party)
            slot_ids.extend(slot for _ in layout.factor_party)
            roles.extend(layout.factor_role)
        return cls(
            factor_party=tuple(parties), factor_slot=tuple(slot_ids), factor_role=tuple(roles)
        )

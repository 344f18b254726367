from typing import Any

from pydantic import BaseModel, Field

from app import __version__
from app.models.ensemble import CountingReport, RateReport
from app.models.marking import EntanglementLedger, MarkingVerdict
from app.models.search import GramSearchResult


class RunReport(BaseModel):
    """Self-describing result of one command run."""

    command: str
    parameters: dict[str, Any] = Field(default_factory=dict)
    seed: int | None = None
    version: str = __version__
    passed: bool = Field(..., description="Maps to exit code 0 (True) or 1 (False)")
    verdicts: list[MarkingVerdict] = Field(default_factory=list)
    ledgers: list[EntanglementLedger] = Field(default_factory=list)
    rates: list[RateReport] = Field(default_factory=list)
    bounds: list[CountingReport] = Field(default_factory=list)
    unmarkable_by_counting: bool | None = Field(None, description="K! > d^K; False means silent")
    search: list[GramSearchResult] = Field(default_factory=list)
    messages: list[str] = Field(default_factory=list, description="Human summary lines")
    wall_clock_seconds: float = 0.0

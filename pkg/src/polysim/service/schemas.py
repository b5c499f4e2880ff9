"""Request and response models for the simulation service."""
from __future__ import annotations

from pydantic import BaseModel, Field


class SimulationRequest(BaseModel):
    scenario: str = Field(description="Scenario document (YAML)")
    end_time: float | None = Field(default=None, gt=0)
    max_step: float | None = Field(default=None, gt=0)
    seed: int | None = None
    verify: bool = Field(default=False, description="Run the dense-resampling event-completeness check")
    include_trace: bool = True


class EventRecordModel(BaseModel):
    t: float
    kind: str
    pair: str
    detail: str = ""


class TraceRecordModel(BaseModel):
    t: float
    h: float
    branch: str
    min_dist: float
    energy: float


class HistogramBucketModel(BaseModel):
    lo: float
    hi: float
    count: int


class SummaryModel(BaseModel):
    steps: int
    simulated_time: float
    quiescent: bool
    manifold_change_count: int
    min_pairwise_distance: float
    mean_step: float
    mean_time_between_manifold_changes: float
    impulse_count: int
    max_impulse_energy_gain: float
    step_histogram: list[HistogramBucketModel]


class VerificationModel(BaseModel):
    intervals_checked: int
    fine_steps: int
    hidden_changes: int
    passed: bool


class SimulationResponse(BaseModel):
    status: str  # completed | aborted
    error: str | None = None
    summary: SummaryModel
    events: list[EventRecordModel]
    trace: list[TraceRecordModel] = []
    verification: VerificationModel | None = None


class ScenarioListResponse(BaseModel):
    scenarios: list[str]


class ScenarioDocumentResponse(BaseModel):
    name: str
    content: str


class ValidationRequest(BaseModel):
    scenario: str


class ValidationResponse(BaseModel):
    valid: bool
    error: str | None = None
    bodies: int = 0
    chains: int = 0
    end_time: float | None = None


class HealthResponse(BaseModel):
    status: str
    version: str

"""Simulation service: scenario in, event log and statistics out.

The route handlers are thin wrappers over `run_simulation` and
`validate_scenario`, which the command-line client also calls directly when
no remote server is configured.
"""
from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..scenario import ScenarioError, bundled_scenario_names, load_bundled_scenario, load_scenario
from ..simulator import run, verify_event_completeness
from .schemas import (
    EventRecordModel,
    HealthResponse,
    HistogramBucketModel,
    ScenarioDocumentResponse,
    ScenarioListResponse,
    SimulationRequest,
    SimulationResponse,
    SummaryModel,
    TraceRecordModel,
    ValidationRequest,
    ValidationResponse,
    VerificationModel,
)


def _finite(x: float) -> float:
    # JSON has no infinity; clamp the no-events sentinel
    return x if math.isfinite(x) else 1e308


def validate_scenario(request: ValidationRequest) -> ValidationResponse:
    try:
        state, cfg = load_scenario(request.scenario)
    except ScenarioError as exc:
        return ValidationResponse(valid=False, error=str(exc))
    return ValidationResponse(valid=True, bodies=len(state.bodies), chains=len(state.chains),
                              end_time=cfg.end_time)


def run_simulation(request: SimulationRequest) -> SimulationResponse:
    """Load, run, and package a scenario; raises ScenarioError on bad input."""
    state, cfg = load_scenario(request.scenario, seed=request.seed)
    if request.end_time is not None:
        cfg.end_time = request.end_time
    if request.max_step is not None:
        cfg.max_step = request.max_step
    result = run(state, cfg, record_states=request.verify)
    verification = None
    if request.verify and not result.aborted:
        report = verify_event_completeness(result, cfg)
        verification = VerificationModel(
            intervals_checked=report.intervals_checked,
            fine_steps=report.fine_steps,
            hidden_changes=report.hidden_changes,
            passed=report.passed,
        )
    stats = result.stats
    summary = SummaryModel(
        steps=stats.steps,
        simulated_time=stats.sim_time,
        quiescent=stats.quiescent,
        manifold_change_count=stats.manifold_changes,
        min_pairwise_distance=_finite(stats.min_distance),
        mean_step=stats.mean_step,
        mean_time_between_manifold_changes=_finite(stats.mean_time_between_changes),
        impulse_count=stats.impulse_count,
        max_impulse_energy_gain=stats.max_energy_gain,
        step_histogram=[HistogramBucketModel(lo=lo, hi=hi, count=c) for lo, hi, c in stats.step_histogram],
    )
    return SimulationResponse(
        status="aborted" if result.aborted else "completed",
        error=result.error,
        summary=summary,
        events=[EventRecordModel(t=e.time, kind=e.kind, pair=e.pair, detail=e.detail) for e in result.events],
        trace=[
            TraceRecordModel(t=r.t, h=r.h, branch=r.branch, min_dist=_finite(r.min_dist), energy=r.energy)
            for r in result.trace
        ] if request.include_trace else [],
        verification=verification,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="polysim", version=__version__,
                  description="Interpenetration-free rigid body simulation service")

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/scenarios", response_model=ScenarioListResponse)
    def list_scenarios():
        return ScenarioListResponse(scenarios=bundled_scenario_names())

    @app.get("/scenarios/{name}", response_model=ScenarioDocumentResponse)
    def get_scenario(name: str):
        try:
            content = load_bundled_scenario(name)
        except ScenarioError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return ScenarioDocumentResponse(name=name, content=content)

    @app.post("/scenarios/validate", response_model=ValidationResponse)
    def validate(request: ValidationRequest):
        return validate_scenario(request)

    @app.post("/simulate", response_model=SimulationResponse)
    def simulate(request: SimulationRequest):
        try:
            return run_simulation(request)
        except ScenarioError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return app


app = create_app()

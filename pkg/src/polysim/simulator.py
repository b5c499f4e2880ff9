"""Stepping loop: safe step selection, semi-implicit integration, contact
impulses, and event logging.

Each step takes the largest step the safe-step controller allows, integrates
positions then velocities, determines contacts at the new configuration and
applies constraint impulses.  Manifold changes are detected structurally by
comparing the per-pair sets of active contact features between steps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .advancement import eligible_pairs, pair_key, safe_step
from .bodies import SystemState
from .config import SimConfig
from .contact import build_contact_problem, solve_contact
from .distance import PenetrationError, bounding_sphere_gap, pairwise_distance
from .dynamics import integrate_position, integrate_velocity, mechanical_energy
from .lcp import LCPError
from .manifold import contact_manifold
from .separating import separating_plane

log = logging.getLogger(__name__)

EVENT_KINDS = ("manifold_change", "transient_contact", "impulse_applied",
               "degenerate_plane_warning", "forced_min_step")


class SimulationError(RuntimeError):
    """Hard failure: inadmissible state or unrecoverable solver breakdown."""


@dataclass
class SimEvent:
    time: float
    kind: str
    pair: str
    detail: str = ""
    before: frozenset | None = None
    after: frozenset | None = None


@dataclass
class StepRecord:
    t: float
    h: float
    branch: str
    min_dist: float
    energy: float


@dataclass
class ContactScan:
    pair_contacts: list  # (key, ref_a, ref_b, manifold)
    min_distance: float
    degenerate: list  # (key, uniqueness)


def contact_scan(state: SystemState, cfg: SimConfig, clearance: dict | None = None,
                 sticky_pairs: frozenset | None = None) -> ContactScan:
    """Distance sweep at the current configuration; manifolds for touching pairs.

    Far pairs contribute a conservative lower bound (guaranteed clearance from
    the step controller, or the bounding-sphere gap) to the minimum-distance
    record instead of an exact query.  Pairs named in `sticky_pairs` keep
    receiving contact handling in the widened hysteresis layer.
    """
    from .advancement import CONTACT_EXIT_FACTOR

    colls = state.collidables()
    pair_contacts = []
    degenerate = []
    min_dist = np.inf
    clearance = clearance or {}
    sticky = sticky_pairs or frozenset()
    for a, b in eligible_pairs(state, colls):
        key = pair_key(a, b)
        pair_tol = cfg.touch_tolerance * (CONTACT_EXIT_FACTOR if key in sticky else 1.0)
        known = clearance.get(key)
        if known is not None and known > pair_tol:
            min_dist = min(min_dist, known)
            continue
        gap = bounding_sphere_gap(a.polytope, a.pose, b.polytope, b.pose)
        if gap > max(10.0 * pair_tol, 1e-3):
            min_dist = min(min_dist, gap)
            continue
        try:
            dist = pairwise_distance(
                a.polytope, a.pose, b.polytope, b.pose,
                touch_tolerance=pair_tol,
                penetration_tolerance=cfg.penetration_tolerance,
            )
        except PenetrationError as exc:
            raise SimulationError(
                f"interpenetration between {a.name} and {b.name}: depth {exc.depth:.3e} m"
            ) from exc
        min_dist = min(min_dist, min(dist.signed_separation, dist.distance))
        if dist.distance > pair_tol:
            continue
        plane = separating_plane(a.polytope, a.pose, b.polytope, b.pose, dist, pair_tol)
        if plane.degenerate:
            degenerate.append((key, plane.uniqueness))
        m = contact_manifold(a.polytope, a.pose, a.twist, b.polytope, b.pose, b.twist, plane, pair_tol)
        if m.points:
            pair_contacts.append((key, a.ref, b.ref, m))
    return ContactScan(pair_contacts, float(min_dist), degenerate)


def active_contact_snapshot(state: SystemState, scan: ContactScan, cfg: SimConfig) -> dict:
    """Map pair key -> frozenset of active contact feature labels.

    A point is active when its gap rate (at the state's current velocities)
    is at or below the rest tolerance: resting or constrained contact.
    Receding points have deactivated and drop out of the snapshot.
    """
    from .contact import relative_normal_velocity

    colls = {str(c.ref): c for c in state.collidables()}
    snapshot = {}
    for key, ref_a, ref_b, m in scan.pair_contacts:
        ca, cb = colls[str(ref_a)], colls[str(ref_b)]
        normal = -m.plane.normal
        labels = []
        for p in m.points:
            rate = relative_normal_velocity(ca.twist, cb.twist, p.position, normal)
            if rate <= cfg.rest_velocity_tol:
                labels.append(p.label)
        if labels:
            snapshot[key] = frozenset(labels)
    return snapshot


def detect_manifold_change(before: dict, after: dict) -> list[tuple[str, frozenset, frozenset]]:
    """Structural differences between two contact snapshots, per pair."""
    changes = []
    for key in sorted(set(before) | set(after)):
        old = before.get(key, frozenset())
        new = after.get(key, frozenset())
        if old != new:
            changes.append((key, old, new))
    return changes


@dataclass
class StepOutcome:
    state: SystemState
    h: float
    branch: str
    events: list[SimEvent]
    scan: ContactScan
    snapshot: dict
    impulse_records: list  # (pair keys, ke_before, ke_after, total_normal_impulse)


def simulate_step(state: SystemState, budget: float, cfg: SimConfig,
                  prev_snapshot: dict | None = None, hold_hint: float | None = None) -> StepOutcome:
    """One adaptive step: h = min(safe step, budget), integrate, resolve contacts."""
    sticky = frozenset(prev_snapshot.keys()) if prev_snapshot else frozenset()
    result = safe_step(state, budget, cfg, hold_hint, sticky)
    if not result.dt > 0.0:
        raise SimulationError(f"non-positive step {result.dt}")
    events: list[SimEvent] = []
    t0 = state.time
    for key, uniqueness in result.degenerate_planes:
        log.warning("degenerate separating plane (%s) for pair %s", uniqueness, key)
        events.append(SimEvent(t0, "degenerate_plane_warning", key, uniqueness))
    if result.branch == "transient_min_step":
        events.append(SimEvent(t0, "transient_contact", result.limiting_pair or "", f"dt={result.dt:.3e}"))
    if result.forced_min_step:
        events.append(SimEvent(t0, "forced_min_step", result.limiting_pair or "", "held-contact trial hit the floor"))

    h = result.dt
    while True:
        trial = integrate_position(state, h)
        trial = integrate_velocity(trial, h, cfg.gravity)
        scan = contact_scan(trial, cfg, result.clearance_after, sticky)
        try:
            impulse_records = []
            if scan.pair_contacts:
                problem = build_contact_problem(trial, scan.pair_contacts, cfg.rest_velocity_tol)
                solution = solve_contact(problem)
                problem.island.write_velocities(trial, solution.v_plus)
                if solution.applied:
                    pairs = sorted({p.pair_key for p in problem.points})
                    impulse_records.append((
                        pairs,
                        solution.kinetic_energy_before,
                        solution.kinetic_energy_after,
                        float(solution.normal_impulses.sum()),
                    ))
                    events.append(SimEvent(
                        trial.time, "impulse_applied", ";".join(pairs),
                        f"sum_normal_impulse={solution.normal_impulses.sum():.6e}",
                    ))
            break
        except LCPError:
            if h <= cfg.min_step:
                raise SimulationError("contact solve failed at the minimum step")
            h = max(0.5 * h, cfg.min_step)
            events = [e for e in events if e.kind != "impulse_applied"]
            continue

    snapshot = active_contact_snapshot(trial, scan, cfg)
    if prev_snapshot is not None:
        for key, old, new in detect_manifold_change(prev_snapshot, snapshot):
            events.append(SimEvent(
                trial.time, "manifold_change", key,
                f"{len(old)}pts->{len(new)}pts", old, new,
            ))
    return StepOutcome(trial, h, result.branch, events, scan, snapshot, impulse_records)


def speed_measure(state: SystemState) -> float:
    """Largest body-point speed bound, used for quiescence detection."""
    worst = 0.0
    for c in state.collidables():
        if c.is_static:
            continue
        worst = max(worst, float(np.linalg.norm(c.twist.linear))
                    + float(np.linalg.norm(c.twist.angular)) * c.polytope.bounding_radius)
    return worst


@dataclass
class RunStats:
    steps: int = 0
    sim_time: float = 0.0
    manifold_changes: int = 0
    min_distance: float = np.inf
    mean_step: float = 0.0
    mean_time_between_changes: float = np.inf
    step_histogram: list = field(default_factory=list)  # (lo, hi, count)
    quiescent: bool = False
    impulse_count: int = 0
    max_energy_gain: float = 0.0  # across impulse applications; <= tolerance


@dataclass
class RunResult:
    final_state: SystemState
    events: list[SimEvent]
    trace: list[StepRecord]
    stats: RunStats
    states: list[SystemState] | None = None  # per-step snapshots when recording
    aborted: bool = False
    error: str | None = None


def step_histogram(steps: list[float], cfg: SimConfig) -> list[tuple[float, float, int]]:
    """Power-of-two buckets from the minimum step up to the step budget."""
    edges = [cfg.min_step]
    while edges[-1] < cfg.max_step:
        edges.append(min(edges[-1] * 2.0, cfg.max_step * (1 + 1e-12)))
    buckets = []
    arr = np.asarray(steps)
    for lo, hi in zip(edges[:-1], edges[1:]):
        count = int(((arr >= lo) & (arr < hi)).sum())
        buckets.append((lo, hi, count))
    if len(arr):
        # the budget itself lands in the top bucket
        top = int((arr >= edges[-1]).sum())
        if buckets:
            lo, hi, count = buckets[-1]
            buckets[-1] = (lo, hi, count + top)
        below = int((arr < edges[0]).sum())
        if below:
            lo, hi, count = buckets[0]
            buckets[0] = (lo, hi, count + below)
    return buckets


def run(state: SystemState, cfg: SimConfig, record_states: bool = False) -> RunResult:
    """Step until the end time, quiescence, or a hard error (log flushed)."""
    events: list[SimEvent] = []
    trace: list[StepRecord] = []
    states: list[SystemState] | None = [state.copy()] if record_states else None
    steps: list[float] = []
    stats = RunStats()
    calm_steps = 0
    current = state
    aborted = False
    error = None
    try:
        snapshot = active_contact_snapshot(current, contact_scan(current, cfg), cfg)
    except SimulationError as exc:
        log.error("inadmissible initial state: %s", exc)
        return RunResult(current, events, trace, stats, states, True, str(exc))
    hold_hint = None
    while current.time < cfg.end_time - 1e-15:
        budget = min(cfg.max_step, cfg.end_time - current.time)
        try:
            outcome = simulate_step(current, budget, cfg, snapshot, hold_hint)
        except SimulationError as exc:
            aborted = True
            error = str(exc)
            log.error("simulation aborted at t=%.6f: %s", current.time, error)
            break
        current = outcome.state
        snapshot = outcome.snapshot
        events.extend(outcome.events)
        steps.append(outcome.h)
        hold_hint = outcome.h if outcome.branch == "constrained" else None
        for _, ke_before, ke_after, _ in outcome.impulse_records:
            stats.max_energy_gain = max(stats.max_energy_gain, ke_after - ke_before)
        energy = mechanical_energy(current, cfg.gravity)
        trace.append(StepRecord(current.time, outcome.h, outcome.branch, outcome.scan.min_distance, energy))
        if states is not None:
            states.append(current.copy())
        stats.min_distance = min(stats.min_distance, outcome.scan.min_distance)
        if speed_measure(current) < cfg.quiescence_speed:
            calm_steps += 1
            if calm_steps >= cfg.quiescence_steps:
                stats.quiescent = True
                break
        else:
            calm_steps = 0

    stats.steps = len(steps)
    stats.sim_time = current.time
    stats.mean_step = float(np.mean(steps)) if steps else 0.0
    change_times = [e.time for e in events if e.kind == "manifold_change"]
    stats.manifold_changes = len(change_times)
    if len(change_times) >= 2:
        stats.mean_time_between_changes = float(np.mean(np.diff(change_times)))
    stats.step_histogram = step_histogram(steps, cfg)
    stats.impulse_count = sum(1 for e in events if e.kind == "impulse_applied")
    return RunResult(current, events, trace, stats, states, aborted, error)


@dataclass
class VerificationReport:
    intervals_checked: int
    fine_steps: int
    hidden_changes: int
    details: list

    @property
    def passed(self) -> bool:
        return self.hidden_changes == 0


def verify_event_completeness(result: RunResult, cfg: SimConfig, refine: int = 100,
                              max_fine_steps: int | None = None) -> VerificationReport:
    """Resimulate every inter-event interval at `refine`-times finer fixed steps.

    A manifold change observed strictly inside any interval (anywhere but the
    interval's final substep) is a hidden event the adaptive run missed.
    Requires the run to have recorded per-step states.
    """
    if result.states is None:
        raise ValueError("run() must be called with record_states=True for verification")
    times = [result.states[0].time] + [r.t for r in result.trace]
    change_steps = sorted({
        next(i for i, t in enumerate(times) if abs(t - e.time) < 1e-15)
        for e in result.events if e.kind == "manifold_change"
    })
    boundaries = [0] + change_steps + [len(times) - 1]
    boundaries = sorted(set(boundaries))
    intervals = 0
    fine_total = 0
    hidden = 0
    details = []
    for a, b in zip(boundaries[:-1], boundaries[1:]):
        if b - a < 1:
            continue
        duration = times[b] - times[a]
        if duration <= 0.0:
            continue
        n_fine = refine * (b - a)
        if max_fine_steps is not None and fine_total + n_fine > max_fine_steps:
            break
        start = result.states[a]
        reference = active_contact_snapshot(start, contact_scan(start, cfg), cfg)
        snapshots = resimulate_fixed(start, duration, n_fine, cfg)
        intervals += 1
        fine_total += n_fine
        for k, snap in enumerate(snapshots[:-1]):
            if snap != reference:
                hidden += 1
                details.append((times[a], times[b], k, n_fine))
                break
    return VerificationReport(intervals, fine_total, hidden, details)


def resimulate_fixed(state: SystemState, duration: float, n_steps: int, cfg: SimConfig):
    """Fixed-step re-integration used as the event-completeness oracle.

    Returns the contact snapshots observed after every fixed substep.
    """
    h = duration / n_steps
    current = state.copy()
    snapshots = []
    sticky = frozenset(active_contact_snapshot(current, contact_scan(current, cfg), cfg).keys())
    for _ in range(n_steps):
        current = integrate_position(current, h)
        current = integrate_velocity(current, h, cfg.gravity)
        scan = contact_scan(current, cfg, None, sticky)
        if scan.pair_contacts:
            problem = build_contact_problem(current, scan.pair_contacts, cfg.rest_velocity_tol)
            solution = solve_contact(problem)
            problem.island.write_velocities(current, solution.v_plus)
        snapshot = active_contact_snapshot(current, scan, cfg)
        snapshots.append(snapshot)
        sticky = frozenset(snapshot.keys())
    return snapshots

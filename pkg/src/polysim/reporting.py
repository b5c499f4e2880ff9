"""Result emission: CSV event and trace files plus a plain-text summary."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .config import SimConfig
from .simulator import RunResult

EVENT_COLUMNS = ["t", "kind", "pair", "detail"]
TRACE_COLUMNS = ["t", "h", "branch", "min_dist", "energy"]


def write_events_csv(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_COLUMNS)
        for e in result.events:
            writer.writerow([repr(e.time), e.kind, e.pair, e.detail])


def write_trace_csv(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in result.trace:
            writer.writerow([repr(r.t), repr(r.h), r.branch, repr(r.min_dist), repr(r.energy)])


def summary_text(result: RunResult, cfg: SimConfig) -> str:
    stats = result.stats
    lines = [
        f"status: {'aborted' if result.aborted else 'completed'}",
        f"steps: {stats.steps}",
        f"simulated_time: {stats.sim_time!r}",
        f"quiescent: {stats.quiescent}",
        f"manifold_change_count: {stats.manifold_changes}",
        f"min_pairwise_distance: {stats.min_distance!r}",
        f"mean_step: {stats.mean_step!r}",
        f"mean_time_between_manifold_changes: {stats.mean_time_between_changes!r}",
        f"impulse_count: {stats.impulse_count}",
        f"max_impulse_energy_gain: {stats.max_energy_gain!r}",
    ]
    if result.error:
        lines.append(f"error: {result.error}")
    lines.append("step_histogram:  # power-of-two buckets from min_step to max_step")
    for lo, hi, count in stats.step_histogram:
        lines.append(f"  [{lo:.3e}, {hi:.3e}): {count}")
    return "\n".join(lines) + "\n"


def emit_results(result: RunResult, cfg: SimConfig, out_dir, fmt: str = "csv", prefix: str = "") -> dict:
    """Write events.csv, trace.csv and summary.txt; returns the paths."""
    if fmt != "csv":
        raise ValueError(f"unsupported output format '{fmt}'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / f"{prefix}events.csv",
        "trace": out / f"{prefix}trace.csv",
        "summary": out / f"{prefix}summary.txt",
    }
    write_events_csv(result, paths["events"])
    write_trace_csv(result, paths["trace"])
    paths["summary"].write_text(summary_text(result, cfg))
    return paths

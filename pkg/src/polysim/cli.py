"""Command-line client for the simulation service.

Builds a simulation request from a scenario file and flags, submits it to the
service (in process by default, or to a remote server with --server), and
writes the event, trace and summary outputs.

Exit codes: 0 clean completion, 1 simulation hard error or failed
verification, 2 usage or scenario errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .scenario import ScenarioError
from .service.schemas import SimulationRequest, SimulationResponse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polysim",
        description="Run a rigid-body scenario and emit its event log, step trace, and summary.",
    )
    parser.add_argument("scenario", help="path to a scenario file (YAML)")
    parser.add_argument("--end-time", type=float, default=None, help="override the scenario end time (s)")
    parser.add_argument("--max-step", type=float, default=None, help="override the maximum integration step (s)")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario random seed")
    parser.add_argument("--out-dir", default=".", help="directory for events.csv, trace.csv, summary.txt")
    parser.add_argument("--format", choices=["csv"], default="csv", help="output format")
    parser.add_argument("--verify", action="store_true",
                        help="densely resimulate inter-event intervals to check no event was missed")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    parser.add_argument("--server", default=None, metavar="URL",
                        help="submit to a running service instead of simulating in process")
    return parser


def _submit(request: SimulationRequest, server: str | None) -> SimulationResponse:
    if server is None:
        from .service.app import run_simulation

        return run_simulation(request)
    import httpx

    reply = httpx.post(f"{server.rstrip('/')}/simulate", json=request.model_dump(), timeout=None)
    if reply.status_code == 422:
        detail = reply.json().get("detail", reply.text)
        raise ScenarioError(str(detail))
    reply.raise_for_status()
    return SimulationResponse.model_validate(reply.json())


def _write_outputs(response: SimulationResponse, out_dir: str, fmt: str) -> None:
    import csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "kind", "pair", "detail"])
        for e in response.events:
            writer.writerow([repr(e.t), e.kind, e.pair, e.detail])
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "h", "branch", "min_dist", "energy"])
        for r in response.trace:
            writer.writerow([repr(r.t), repr(r.h), r.branch, repr(r.min_dist), repr(r.energy)])
    s = response.summary
    lines = [
        f"status: {response.status}",
        f"steps: {s.steps}",
        f"simulated_time: {s.simulated_time!r}",
        f"quiescent: {s.quiescent}",
        f"manifold_change_count: {s.manifold_change_count}",
        f"min_pairwise_distance: {s.min_pairwise_distance!r}",
        f"mean_step: {s.mean_step!r}",
        f"mean_time_between_manifold_changes: {s.mean_time_between_manifold_changes!r}",
        f"impulse_count: {s.impulse_count}",
        f"max_impulse_energy_gain: {s.max_impulse_energy_gain!r}",
    ]
    if response.error:
        lines.append(f"error: {response.error}")
    if response.verification is not None:
        v = response.verification
        lines.append(f"verification: {'passed' if v.passed else 'FAILED'} "
                     f"({v.intervals_checked} intervals, {v.fine_steps} fine steps, {v.hidden_changes} hidden changes)")
    lines.append("step_histogram:  # power-of-two buckets from min_step to max_step")
    for bucket in s.step_histogram:
        lines.append(f"  [{bucket.lo:.3e}, {bucket.hi:.3e}): {bucket.count}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    path = Path(args.scenario)
    if not path.is_file():
        print(f"error: scenario file not found: {path}", file=sys.stderr)
        return 2
    request = SimulationRequest(
        scenario=path.read_text(),
        end_time=args.end_time,
        max_step=args.max_step,
        seed=args.seed,
        verify=args.verify,
    )
    try:
        response = _submit(request, args.server)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _write_outputs(response, args.out_dir, args.format)
    if not args.quiet:
        print((Path(args.out_dir) / "summary.txt").read_text(), end="")

    if response.status != "completed":
        print(f"simulation aborted: {response.error}", file=sys.stderr)
        return 1
    if response.verification is not None and not response.verification.passed:
        print("verification failed: manifold changes found inside inter-event intervals", file=sys.stderr)
        return 1
    return 0


def entrypoint() -> None:
    sys.exit(main())

"""Safe-step computation: how far the system may integrate without missing a
change to any contact manifold.

Disjoint pairs use conservative advancement on the pairwise distance; touching
pairs combine a bound on off-plane vertices reaching the separating plane with
a trial-integration bound on the held contact staying held.  Pairs with an
approaching contact point are transient and force the minimum step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bodies import Collidable, CollidableRef, MultibodyChain, SystemState
from .config import SimConfig
from .contact import ConstrainedPoint, ContactProblem, IslandIndex, solve_contact
from .distance import DistanceResult, bounding_sphere_gap, pairwise_distance
from .dynamics import integrate_position, integrate_velocity
from .lcp import LCPError
from .manifold import ContactManifold, contact_manifold, farthest_manifold_point
from .separating import SeparatingPlane, plane_basis, separating_plane, vertices_off_plane


@dataclass
class SafeStepResult:
    dt: float  # always > 0 (possibly inf when nothing binds and no budget)
    branch: str  # disjoint_ca | constrained | transient_min_step | unbounded
    limiting_pair: str | None = None
    limiting_vertex: tuple | None = None  # (owner, vertex index)
    dt_new_contact: float | None = None  # bound for a new vertex reaching the plane
    dt_hold: float | None = None  # bound for held contacts staying held
    degenerate_planes: list = field(default_factory=list)
    forced_min_step: bool = False
    touching_pairs: list = field(default_factory=list)  # (key, ref_a, ref_b) in contact
    # per-pair guaranteed distance lower bounds after stepping by dt:
    # distance_now - motion_bound * dt (conservative); lets the post-step
    # contact scan skip exact queries for pairs that cannot have touched
    clearance_after: dict = field(default_factory=dict)


def rigid_motion_bound(coll: Collidable, direction: np.ndarray, radius: float) -> float:
    """Per-body distance the body can close along a direction in unit time."""
    t = coll.twist
    return abs(float(t.linear @ direction)) + float(np.linalg.norm(np.cross(t.angular, direction))) * radius


def multibody_motion_bound(chain: MultibodyChain, link_index: int, direction: np.ndarray, frames=None) -> float:
    """Unit-time motion bound for one chain link along a direction.

    Joint contributions accumulate lever arms from the joint to the link's
    bounding sphere; prismatic spacing uses |q| + |q̇| for the attainable
    displacement.
    """
    frames = frames or chain.forward_kinematics()
    direction = np.asarray(direction, dtype=float)
    radius = chain.links[link_index].polytope.bounding_radius

    def spacing(k: int) -> float:
        if chain.links[k].joint_type == "prismatic":
            return abs(float(chain.q[k])) + abs(float(chain.qd[k]))
        return float(np.linalg.norm(frames[k + 1].joint_position - frames[k].joint_position))

    def gamma(j: int) -> float:
        return sum(spacing(k) for k in range(j, link_index)) + 2.0 * radius

    total = abs(float(chain.base_linear_velocity @ direction))
    total += float(np.linalg.norm(chain.base_angular_velocity)) * gamma(0)
    for j in range(link_index + 1):
        qd = abs(float(chain.qd[j]))
        if chain.links[j].joint_type == "prismatic":
            total += qd
        else:
            total += qd * gamma(j)
    return total


def _participant_bound(state: SystemState, coll: Collidable, direction: np.ndarray) -> float:
    if coll.ref.kind == "body":
        return rigid_motion_bound(coll, direction, coll.polytope.bounding_radius)
    chain = state.chains[coll.ref.index]
    return multibody_motion_bound(chain, coll.ref.link, direction)


def ca_step(coll_a: Collidable, coll_b: Collidable, dist: DistanceResult) -> float:
    """Conservative advancement bound for two disjoint free rigid bodies."""
    if dist.distance <= 0.0:
        raise ValueError("conservative advancement requires a positive distance")
    d = dist.direction
    denom = abs(float(d @ (coll_a.twist.linear - coll_b.twist.linear)))
    denom += float(np.linalg.norm(np.cross(coll_a.twist.angular, d))) * coll_a.polytope.bounding_radius
    denom += float(np.linalg.norm(np.cross(coll_b.twist.angular, d))) * coll_b.polytope.bounding_radius
    if denom <= 0.0:
        return np.inf
    return dist.distance / denom


def pair_advancement_step(state: SystemState, coll_a: Collidable, coll_b: Collidable, dist: DistanceResult) -> float:
    """CA bound for any pair; chain links substitute their per-link bounds."""
    if coll_a.ref.kind == "body" and coll_b.ref.kind == "body":
        return ca_step(coll_a, coll_b, dist)
    denom = _participant_bound(state, coll_a, dist.direction) + _participant_bound(state, coll_b, dist.direction)
    if denom <= 0.0:
        return np.inf
    return dist.distance / denom


def _vertex_rate_term(state: SystemState, coll: Collidable, normal: np.ndarray, is_owner: bool) -> float:
    if coll.ref.kind == "body":
        return float(np.linalg.norm(np.cross(coll.twist.angular, normal)))
    chain = state.chains[coll.ref.index]
    if is_owner:
        # multibody owner form, implemented as printed: base rate unprojected
        total = float(np.linalg.norm(chain.base_angular_velocity))
        total += float(np.abs(chain.qd[: coll.ref.link + 1]).sum())
        return total
    return float(np.linalg.norm(np.cross(coll.twist.angular, normal)))


def constrained_vertex_bound(
    state: SystemState,
    owner: Collidable,
    other: Collidable,
    vertex_position: np.ndarray,
    plane_distance: float,
    plane: SeparatingPlane,
    xi: np.ndarray,
) -> float:
    """Earliest time an off-plane vertex can reach the separating plane.

    The vertex must be strictly off the plane; the rate terms of both bodies
    multiply the lever arm from the vertex to the farthest manifold point.
    """
    if plane_distance <= 0.0:
        raise ValueError("vertex lies on the separating plane")
    arm = float(np.linalg.norm(vertex_position - xi))
    rate = _vertex_rate_term(state, owner, plane.normal, True) + _vertex_rate_term(state, other, plane.normal, False)
    denom = rate * arm
    if denom <= 0.0:
        return np.inf
    return plane_distance / denom


def bound_new_contact(
    state: SystemState,
    coll_a: Collidable,
    coll_b: Collidable,
    plane: SeparatingPlane,
    manifold: ContactManifold,
    touch_tolerance: float,
):
    """Minimum vertex-arrival bound over all off-plane vertices of the pair."""
    best = np.inf
    best_vertex = None
    for record in vertices_off_plane(coll_a.polytope, coll_a.pose, coll_b.polytope, coll_b.pose, plane, touch_tolerance):
        owner = coll_a if record.owner == "A" else coll_b
        other = coll_b if record.owner == "A" else coll_a
        xi = farthest_manifold_point(manifold, record.position)
        bound = constrained_vertex_bound(state, owner, other, record.position, record.plane_distance, plane, xi)
        if bound < best:
            best = bound
            best_vertex = (owner.name, record.index)
    return best, best_vertex


@dataclass
class _FrozenContact:
    pair_key: str
    ref_a: CollidableRef
    ref_b: CollidableRef
    local_a: np.ndarray  # anchor in A's body frame at freeze time
    normal: np.ndarray  # contact normal, frozen in world
    local_b: np.ndarray  # anchor in B's body frame (for the gap measure)
    watched: bool


def _anchor_world(state: SystemState, ref: CollidableRef, local: np.ndarray, chain_frames: dict) -> np.ndarray:
    if ref.kind == "body":
        return state.bodies[ref.index].pose.transform(local[None])[0]
    frames = chain_frames.get(ref.index)
    if frames is None:
        frames = state.chains[ref.index].forward_kinematics()
        chain_frames[ref.index] = frames
    f = frames[ref.link]
    return f.com + f.rotation @ local


def _freeze_island_contacts(state: SystemState, island_pairs, rest_tol: float) -> list[_FrozenContact]:
    colls = {str(c.ref): c for c in state.collidables()}
    frozen: list[_FrozenContact] = []
    for key, ref_a, ref_b, manifold in island_pairs:
        ca = colls[str(ref_a)]
        cb = colls[str(ref_b)]
        normal = -manifold.plane.normal
        for cp in manifold.points:
            if cp.normal_velocity > rest_tol:
                continue  # receding: already deactivated, not held
            frozen.append(_FrozenContact(
                key, ref_a, ref_b,
                ca.pose.inverse_transform(cp.position[None])[0],
                normal.copy(),
                cb.pose.inverse_transform(cp.position[None])[0],
                True,
            ))
    return frozen


def _frozen_contact_problem(state: SystemState, island: IslandIndex, frozen, chain_frames: dict) -> ContactProblem:
    points = []
    for fc in frozen:
        pos = _anchor_world(state, fc.ref_a, fc.local_a, chain_frames)
        points.append(ConstrainedPoint(fc.pair_key, fc.ref_a, fc.ref_b, pos, fc.normal, ()))
    dof = island.total_dof
    n_rows = np.zeros((len(points), dof))
    t_rows = np.zeros((2 * len(points), dof))
    for k, pt in enumerate(points):
        n_rows[k] = island.point_velocity_row(state, pt.ref_a, pt.position, pt.normal) - \
            island.point_velocity_row(state, pt.ref_b, pt.position, pt.normal)
        t1, t2 = plane_basis(pt.normal)
        t_rows[2 * k] = island.point_velocity_row(state, pt.ref_a, pt.position, t1) - \
            island.point_velocity_row(state, pt.ref_b, pt.position, t1)
        t_rows[2 * k + 1] = island.point_velocity_row(state, pt.ref_a, pt.position, t2) - \
            island.point_velocity_row(state, pt.ref_b, pt.position, t2)
    return ContactProblem(island, island.mass_matrix(state), island.velocity_vector(state), n_rows, t_rows, points)


def _frozen_gaps(state: SystemState, frozen) -> np.ndarray:
    chain_frames: dict = {}
    gaps = []
    for fc in frozen:
        pa = _anchor_world(state, fc.ref_a, fc.local_a, chain_frames)
        pb = _anchor_world(state, fc.ref_b, fc.local_b, chain_frames)
        gaps.append(float(fc.normal @ (pa - pb)))
    return np.array(gaps)


def _trial_integrate(state: SystemState, island: IslandIndex, frozen, h: float, substeps: int, cfg: SimConfig):
    """Integrate a private copy with the frozen contact set; report gap data.

    Returns (final gaps, max |gap rate| seen at substep boundaries).
    """
    from .dynamics import advance_positions_in_place, advance_velocities_in_place

    work = state.copy()
    worst_rate = 0.0
    sub = h / substeps
    for _ in range(substeps):
        advance_positions_in_place(work, sub)
        advance_velocities_in_place(work, sub, cfg.gravity)
        problem = _frozen_contact_problem(work, island, frozen, {})
        solution = solve_contact(problem)
        problem.island.write_velocities(work, solution.v_plus)
        if len(solution.normal_rates_after):
            worst_rate = max(worst_rate, float(np.abs(solution.normal_rates_after).max()))
    return _frozen_gaps(work, frozen), worst_rate


def hold_step(
    state: SystemState,
    island_pairs,
    h_candidate: float,
    cfg: SimConfig,
) -> tuple[float, bool]:
    """Largest trial-verified step over which the held contacts stay held.

    Step-doubling error estimation on the contact gaps; the step halves while
    any gap-rate evaluation is non-zero.  The gap error of the first-order
    scheme is second order in h, so step selection uses the square-root law
    h <- 0.9 h (tol/err)^(1/2).  Returns (step, forced_minimum_flag).
    """
    frozen = _freeze_island_contacts(state, island_pairs, cfg.rest_velocity_tol)
    if not frozen:
        return h_candidate, False
    refs = []
    for fc in frozen:
        refs.extend([fc.ref_a, fc.ref_b])
    island = IslandIndex.build(state, refs)
    gaps0 = _frozen_gaps(state, frozen)
    h = max(min(h_candidate, cfg.max_step), cfg.min_step)
    for _ in range(200):
        try:
            gaps_full, rate_full = _trial_integrate(state, island, frozen, h, 1, cfg)
            gaps_half, rate_half = _trial_integrate(state, island, frozen, h, 2, cfg)
        except LCPError:
            if h <= cfg.min_step:
                return cfg.min_step, True
            h = max(0.5 * h, cfg.min_step)
            continue
        if max(rate_full, rate_half) > cfg.rest_velocity_tol:
            if h <= cfg.min_step:
                return cfg.min_step, True
            h = max(0.5 * h, cfg.min_step)
            continue
        err = float(np.abs((gaps_full - gaps0) - (gaps_half - gaps0)).max())
        if err > cfg.gap_error_tol:
            if h <= cfg.min_step:
                return cfg.min_step, True
            h = max(h * 0.9 * np.sqrt(cfg.gap_error_tol / err), cfg.min_step)
            continue
        return h, False
    return cfg.min_step, True


def eligible_pairs(state: SystemState, colls: list[Collidable]):
    """All collidable pairs except static-static and adjacent chain links."""
    pairs = []
    for i in range(len(colls)):
        for j in range(i + 1, len(colls)):
            a, b = colls[i], colls[j]
            if a.is_static and b.is_static:
                continue
            if a.ref.kind == "link" and b.ref.kind == "link" and a.ref.index == b.ref.index:
                chain = state.chains[a.ref.index]
                if not chain.self_collision:
                    continue
                if abs(a.ref.link - b.ref.link) <= 1:
                    continue  # neighbours share a joint; their geometry meets by construction
            pairs.append((a, b))
    return pairs


def pair_key(a: Collidable, b: Collidable) -> str:
    return f"{a.name}|{b.name}"


CONTACT_EXIT_FACTOR = 10.0  # hysteresis: active pairs stay in contact handling
                            # until they clear this multiple of the touch layer


def safe_step(state: SystemState, budget: float, cfg: SimConfig, hold_hint: float | None = None,
              sticky_pairs: frozenset | None = None) -> SafeStepResult:
    """The step-size dispatcher: min over all pairs of each pair's safe bound.

    Always returns a positive step.  `hold_hint` warm-starts the held-contact
    trial near the previously accepted step (growing by at most 1.25x), which
    keeps the controller from re-shrinking from the full budget every step.
    `sticky_pairs` names pairs with currently active contacts; they remain in
    contact handling until they clear a widened layer, so a body rolling at
    the layer boundary is not reclassified every step.  PenetrationError from
    the distance query propagates to the caller (an inadmissible state).
    """
    sticky = sticky_pairs or frozenset()
    colls = state.collidables()
    pairs = eligible_pairs(state, colls)
    result = SafeStepResult(dt=budget, branch="unbounded")
    best = budget

    touching: list[tuple] = []
    pair_motion: dict[str, tuple[float, float]] = {}  # key -> (gap lower bound, motion bound)
    for a, b in pairs:
        key = pair_key(a, b)
        pair_tol = cfg.touch_tolerance * (CONTACT_EXIT_FACTOR if key in sticky else 1.0)
        sphere_gap = bounding_sphere_gap(a.polytope, a.pose, b.polytope, b.pose)
        if sphere_gap > pair_tol:
            # conservative prefilter: a lower bound on the true distance gives
            # a valid (smaller) advancement bound; skip the exact query when
            # even this bound cannot limit the step
            direction = b.pose.position - a.pose.position
            norm = float(np.linalg.norm(direction))
            if norm > 0.0:
                direction /= norm
                denom = _participant_bound(state, a, direction) + _participant_bound(state, b, direction)
                if denom > 0.0 and sphere_gap / denom >= best:
                    pair_motion[key] = (sphere_gap, denom)
                    continue
        dist = pairwise_distance(
            a.polytope, a.pose, b.polytope, b.pose,
            touch_tolerance=pair_tol,
            penetration_tolerance=cfg.penetration_tolerance,
        )
        if dist.distance > pair_tol:
            dt_pair = pair_advancement_step(state, a, b, dist)
            denom = dist.distance / dt_pair if np.isfinite(dt_pair) and dt_pair > 0.0 else 0.0
            pair_motion[key] = (dist.distance, denom)
            if np.isfinite(dt_pair):
                # aim inside the contact layer rather than at its outer edge;
                # strictly below the advancement bound, so still safe, and it
                # keeps closing pairs from flickering across the threshold
                dt_pair *= (dist.distance - 0.5 * cfg.touch_tolerance) / dist.distance
            if dt_pair < best:
                best = dt_pair
                result = SafeStepResult(dt=dt_pair, branch="disjoint_ca", limiting_pair=key)
        else:
            pair_motion[key] = (0.0, 0.0)
            touching.append((a, b, dist, pair_tol))

    transient = False
    constrained: list[tuple] = []
    degenerate_planes = []
    touch_keys = []
    for a, b, dist, pair_tol in touching:
        plane = separating_plane(a.polytope, a.pose, b.polytope, b.pose, dist, pair_tol)
        if plane.degenerate:
            degenerate_planes.append((pair_key(a, b), plane.uniqueness))
        m = contact_manifold(a.polytope, a.pose, a.twist, b.polytope, b.pose, b.twist, plane, pair_tol)
        touch_keys.append((pair_key(a, b), a.ref, b.ref))
        if not m.points:
            # stale geometry: nothing within tolerance of the plane; force the floor
            transient = True
            result = SafeStepResult(dt=cfg.min_step, branch="transient_min_step", limiting_pair=pair_key(a, b))
            continue
        if any(p.normal_velocity < -cfg.rest_velocity_tol for p in m.points):
            transient = True
            result = SafeStepResult(dt=cfg.min_step, branch="transient_min_step", limiting_pair=pair_key(a, b))
            continue
        constrained.append((a, b, plane, m, pair_tol))

    if transient:
        result.dt = cfg.min_step
        result.degenerate_planes = degenerate_planes
        result.touching_pairs = touch_keys
        return result

    if constrained:
        # union-find over collidables connected by touching pairs
        parent: dict[str, str] = {}

        def find(x: str) -> str:
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x: str, y: str) -> None:
            parent[find(x)] = find(y)

        for a, b, plane, m, pair_tol in constrained:
            union(str(a.ref), str(b.ref))
        islands: dict[str, list] = {}
        for a, b, plane, m, pair_tol in constrained:
            islands.setdefault(find(str(a.ref)), []).append((a, b, plane, m, pair_tol))

        for root, members in islands.items():
            island_star = np.inf
            island_vertex = None
            island_key = None
            for a, b, plane, m, pair_tol in members:
                star, vertex = bound_new_contact(state, a, b, plane, m, pair_tol)
                if star < island_star:
                    island_star = star
                    island_vertex = vertex
                    island_key = pair_key(a, b)
            h_candidate = min(best, island_star, budget)
            if hold_hint is not None:
                h_candidate = min(h_candidate, max(1.25 * hold_hint, cfg.min_step))
            if h_candidate <= cfg.min_step:
                hold, forced = cfg.min_step, False
            else:
                island_pairs = [(pair_key(a, b), a.ref, b.ref, m) for a, b, plane, m, pair_tol in members]
                hold, forced = hold_step(state, island_pairs, h_candidate, cfg)
            dt_island = max(min(island_star, hold), cfg.min_step)
            if dt_island < best or result.branch == "unbounded":
                if dt_island < best:
                    best = dt_island
                result = SafeStepResult(
                    dt=best, branch="constrained",
                    limiting_pair=island_key or pair_key(members[0][0], members[0][1]),
                    limiting_vertex=island_vertex,
                    dt_new_contact=island_star, dt_hold=hold,
                    forced_min_step=forced,
                )

    if np.isfinite(budget):
        result.dt = min(result.dt, budget)
    # the constrained and transient branches are already floored at min_step;
    # a disjoint advancement bound must not be inflated (it is the safe limit)
    result.degenerate_planes = degenerate_planes
    result.touching_pairs = touch_keys
    if np.isfinite(result.dt):
        result.clearance_after = {
            key: gap - denom * result.dt for key, (gap, denom) in pair_motion.items()
        }
    return result

"""Contact constraint evaluation and impulse resolution.

The two scalar constraint functions live here; problem assembly and the
impulse solve are added further down and operate on whole contact islands.
"""
from __future__ import annotations

import numpy as np

from .polytope import cross3
from .separating import plane_basis


def signed_gap(point_a: np.ndarray, point_b: np.ndarray, normal: np.ndarray) -> float:
    """Projection of the witness separation onto a unit normal: n . (p_A - p_B)."""
    return float(np.dot(normal, np.asarray(point_a, dtype=float) - np.asarray(point_b, dtype=float)))


def point_velocity_rigid(linear: np.ndarray, angular: np.ndarray, center: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Velocity of a world point on a rigid body given its twist about `center`."""
    return np.asarray(linear, dtype=float) + cross3(angular, np.asarray(point, dtype=float) - center)


def relative_normal_velocity(
    twist_a: "BodyTwist", twist_b: "BodyTwist", point: np.ndarray, normal: np.ndarray
) -> float:
    """Rate of the signed gap: n . (pdot_A - pdot_B) at a shared contact point.

    The term from the rotating normal is dropped exactly because the witness
    points coincide at contact.
    """
    va = point_velocity_rigid(twist_a.linear, twist_a.angular, twist_a.center, point)
    vb = point_velocity_rigid(twist_b.linear, twist_b.angular, twist_b.center, point)
    return float(np.dot(normal, va - vb))


from dataclasses import dataclass, field


@dataclass(frozen=True)
class BodyTwist:
    """Instantaneous rigid twist of a collidable: COM velocity, angular velocity, COM."""

    linear: np.ndarray
    angular: np.ndarray
    center: np.ndarray

    @staticmethod
    def zero(center=(0.0, 0.0, 0.0)) -> "BodyTwist":
        return BodyTwist(np.zeros(3), np.zeros(3), np.asarray(center, dtype=float))


# --- contact island assembly and the impulse solve --------------------------
#
# Unknowns are impulses at the manifold points of every touching pair in an
# island (zero substituted for the step inside the solve).  Normal rows are
# complementary with nonnegative impulses; tangential rows are bilateral
# (no-slip), eliminated by the mixed LCP.  Restitution is zero.

RECEDING_VELOCITY_TOL = 1e-9  # epsilon_v: gap rates above this are receding
CONTACT_REGULARIZATION = 1e-10


@dataclass
class IslandIndex:
    """Generalized-coordinate layout for the bodies and chains of an island."""

    body_ids: list[int]
    chain_ids: list[int]
    offsets: dict  # ("body", i) or ("chain", i) -> (offset, dof)
    total_dof: int

    @staticmethod
    def build(state, refs) -> "IslandIndex":
        body_ids: list[int] = []
        chain_ids: list[int] = []
        for ref in refs:
            if ref.kind == "body":
                if not state.bodies[ref.index].is_static and ref.index not in body_ids:
                    body_ids.append(ref.index)
            else:
                if ref.index not in chain_ids:
                    chain_ids.append(ref.index)
        offsets = {}
        total = 0
        for i in sorted(body_ids):
            offsets[("body", i)] = (total, 6)
            total += 6
        for i in sorted(chain_ids):
            dof = state.chains[i].dof
            offsets[("chain", i)] = (total, dof)
            total += dof
        return IslandIndex(sorted(body_ids), sorted(chain_ids), offsets, total)

    def velocity_vector(self, state) -> np.ndarray:
        v = np.zeros(self.total_dof)
        for i in self.body_ids:
            off, _ = self.offsets[("body", i)]
            v[off:off + 3] = state.bodies[i].linear_velocity
            v[off + 3:off + 6] = state.bodies[i].angular_velocity
        for i in self.chain_ids:
            off, dof = self.offsets[("chain", i)]
            v[off:off + dof] = state.chains[i].qd
        return v

    def write_velocities(self, state, v: np.ndarray) -> None:
        for i in self.body_ids:
            off, _ = self.offsets[("body", i)]
            state.bodies[i].linear_velocity = v[off:off + 3].copy()
            state.bodies[i].angular_velocity = v[off + 3:off + 6].copy()
        for i in self.chain_ids:
            off, dof = self.offsets[("chain", i)]
            state.chains[i].qd = v[off:off + dof].copy()

    def mass_matrix(self, state) -> np.ndarray:
        from .dynamics import chain_mass_matrix

        m = np.zeros((self.total_dof, self.total_dof))
        for i in self.body_ids:
            off, _ = self.offsets[("body", i)]
            body = state.bodies[i]
            m[off:off + 3, off:off + 3] = body.mass * np.eye(3)
            m[off + 3:off + 6, off + 3:off + 6] = body.world_inertia()
        for i in self.chain_ids:
            off, dof = self.offsets[("chain", i)]
            m[off:off + dof, off:off + dof] = chain_mass_matrix(state.chains[i])
        return m

    def point_velocity_row(self, state, ref, point: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Row mapping island velocities to direction . (velocity of `point` on `ref`)."""
        row = np.zeros(self.total_dof)
        if ref.kind == "body":
            key = ("body", ref.index)
            if key not in self.offsets:  # static body
                return row
            off, _ = self.offsets[key]
            body = state.bodies[ref.index]
            row[off:off + 3] = direction
            row[off + 3:off + 6] = cross3(point - body.pose.position, direction)
            return row
        off, dof = self.offsets[("chain", ref.index)]
        chain = state.chains[ref.index]
        jac = chain.point_jacobian(ref.link, point)
        row[off:off + dof] = direction @ jac
        return row


@dataclass
class ConstrainedPoint:
    pair_key: str
    ref_a: object
    ref_b: object
    position: np.ndarray
    normal: np.ndarray  # contact normal (gap opens along it)
    label: tuple


@dataclass
class ContactProblem:
    island: IslandIndex
    mass: np.ndarray
    v_star: np.ndarray
    normal_rows: np.ndarray  # (nc, dof): rates of gap opening
    tangent_rows: np.ndarray  # (2*nc, dof)
    points: list[ConstrainedPoint]

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass
class ContactSolution:
    normal_impulses: np.ndarray
    tangential_impulses: np.ndarray
    v_plus: np.ndarray
    kinetic_energy_before: float
    kinetic_energy_after: float
    normal_rates_after: np.ndarray
    tangent_rates_after: np.ndarray
    pivot_count: int = 0

    @property
    def applied(self) -> bool:
        return len(self.normal_impulses) > 0 and float(np.abs(self.normal_impulses).max()) > 0.0


def build_contact_problem(state, pair_contacts, receding_tol: float = RECEDING_VELOCITY_TOL) -> ContactProblem:
    """Assemble the island impulse problem from per-pair manifolds.

    `pair_contacts` is a list of (pair_key, ref_a, ref_b, manifold).  Only
    points approaching or resting (gap rate <= receding_tol) are constrained;
    receding points have already deactivated.
    """
    refs = []
    for _, ref_a, ref_b, _ in pair_contacts:
        refs.extend([ref_a, ref_b])
    island = IslandIndex.build(state, refs)
    points: list[ConstrainedPoint] = []
    for key, ref_a, ref_b, manifold in pair_contacts:
        contact_normal = -manifold.plane.normal
        for cp in manifold.points:
            if cp.normal_velocity <= receding_tol:
                points.append(ConstrainedPoint(key, ref_a, ref_b, cp.position, contact_normal, cp.label))

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


def solve_contact(problem: ContactProblem, regularization: float = CONTACT_REGULARIZATION) -> ContactSolution:
    """Impulse solve k(v*): no-slip, zero restitution, non-increasing energy.

    LCP failures propagate (the stepping loop halves the step and retries).
    """
    from .lcp import solve_mixed

    m = problem.mass
    v_star = problem.v_star
    ke = lambda v: 0.5 * float(v @ m @ v)
    if problem.count == 0:
        return ContactSolution(np.zeros(0), np.zeros(0), v_star.copy(), ke(v_star), ke(v_star),
                               np.zeros(0), np.zeros(0))
    jac = np.vstack([problem.normal_rows, problem.tangent_rows])
    minv_jt = np.linalg.solve(m, jac.T)
    delassus = jac @ minv_jt + regularization * np.eye(len(jac))
    rhs = jac @ v_star
    nc = problem.count
    free = np.zeros(3 * nc, dtype=bool)
    free[nc:] = True
    sol = solve_mixed(delassus, rhs, free)
    impulses = sol.z
    v_plus = v_star + minv_jt @ impulses
    return ContactSolution(
        normal_impulses=impulses[:nc].copy(),
        tangential_impulses=impulses[nc:].copy(),
        v_plus=v_plus,
        kinetic_energy_before=ke(v_star),
        kinetic_energy_after=ke(v_plus),
        normal_rates_after=problem.normal_rows @ v_plus,
        tangent_rates_after=problem.tangent_rows @ v_plus,
        pivot_count=sol.pivot_count,
    )

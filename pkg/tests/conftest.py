"""Shared fixtures and independent geometric oracles for the test suite.

The oracles here deliberately use different algorithms than the production
code: polytope distance is minimized over all surface-triangle pairs with a
scalar triangle-triangle routine, and screw motions are swept with exact
Rodrigues rotations.
"""
import numpy as np
from scipy.spatial import ConvexHull

from polysim import quaternions
from polysim.polytope import Pose, build_polytope, uniform_density_mass_properties


def random_com_polytope(rng, n_points=10, scale=1.0):
    """Random convex polytope with its body-frame origin at the center of mass."""
    pts = rng.normal(size=(int(n_points), 3)) * scale
    poly = build_polytope(pts)
    _, com, _ = uniform_density_mass_properties(poly, 1.0)
    return build_polytope(poly.vertices - com)


def random_unit_quaternion(rng):
    return quaternions.normalize(rng.normal(size=4))


def random_pose(rng, center=(0.0, 0.0, 0.0), jitter=0.0):
    pos = np.asarray(center, dtype=float) + rng.normal(size=3) * jitter
    return Pose(pos, random_unit_quaternion(rng))


# --- scalar triangle-triangle distance oracle ------------------------------

def _point_segment(p, a, b):
    ab = b - a
    t = np.dot(p - a, ab) / np.dot(ab, ab)
    t = min(1.0, max(0.0, t))
    q = a + t * ab
    return np.linalg.norm(p - q), q


def _segment_segment(p1, q1, p2, q2):
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.dot(d1, d1)
    e = np.dot(d2, d2)
    f = np.dot(d2, r)
    c = np.dot(d1, r)
    b = np.dot(d1, d2)
    denom = a * e - b * b
    if denom > 1e-15 * a * e:
        s = min(1.0, max(0.0, (b * f - c * e) / denom))
    else:
        s = 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    ca = p1 + s * d1
    cb = p2 + t * d2
    return np.linalg.norm(cb - ca), ca, cb


def _point_triangle(p, tri):
    a, b, c = tri
    n = np.cross(b - a, c - a)
    nn = np.dot(n, n)
    if nn < 1e-30:
        d0, q0 = _point_segment(p, a, b)
        d1, q1 = _point_segment(p, a, c)
        return (d0, q0) if d0 <= d1 else (d1, q1)
    dist_plane = np.dot(p - a, n) / np.sqrt(nn)
    proj = p - dist_plane * n / np.sqrt(nn)
    # barycentric inside test
    v0, v1, v2 = b - a, c - a, proj - a
    d00, d01, d11 = np.dot(v0, v0), np.dot(v0, v1), np.dot(v1, v1)
    d20, d21 = np.dot(v2, v0), np.dot(v2, v1)
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    if v >= -1e-12 and w >= -1e-12 and v + w <= 1.0 + 1e-12:
        return abs(dist_plane), proj
    best = (np.inf, None)
    for e0, e1 in ((a, b), (b, c), (c, a)):
        d, q = _point_segment(p, e0, e1)
        if d < best[0]:
            best = (d, q)
    return best


def triangle_triangle_distance(t1, t2):
    best = np.inf
    edges1 = [(t1[0], t1[1]), (t1[1], t1[2]), (t1[2], t1[0])]
    edges2 = [(t2[0], t2[1]), (t2[1], t2[2]), (t2[2], t2[0])]
    for a0, a1 in edges1:
        for b0, b1 in edges2:
            d, _, _ = _segment_segment(a0, a1, b0, b1)
            best = min(best, d)
    for p in t1:
        d, _ = _point_triangle(p, t2)
        best = min(best, d)
    for p in t2:
        d, _ = _point_triangle(p, t1)
        best = min(best, d)
    return best


def oracle_polytope_distance(poly_a, pose_a, poly_b, pose_b):
    """Brute-force surface distance: min over all hull-triangle pairs."""
    va = poly_a.world_vertices(pose_a)
    vb = poly_b.world_vertices(pose_b)
    tris_a = ConvexHull(va).simplices
    tris_b = ConvexHull(vb).simplices
    best = np.inf
    for sa in tris_a:
        t1 = va[sa]
        for sb in tris_b:
            best = min(best, triangle_triangle_distance(t1, vb[sb]))
    return best


# --- symbolic Lagrangian oracle for serial chains ---------------------------

def lagrangian_chain_oracle(links, gravity):
    """Build q̈(q, q̇, u) for a fixed-base serial chain from first principles.

    `links` is a list of dicts with keys: joint ("revolute"|"prismatic"),
    axis, location, com_offset, mass, inertia (3x3).  Returns a callable
    qdd(q, qd, u) evaluated numerically via sympy lambdify.
    """
    import sympy as sp

    n = len(links)
    q = sp.symbols(f"q0:{n}", real=True)
    qd = sp.symbols(f"qd0:{n}", real=True)

    def rodrigues(axis, angle):
        ax = sp.Matrix(axis) / sp.sqrt(sum(a * a for a in axis))
        k = sp.Matrix([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
        return sp.eye(3) + sp.sin(angle) * k + (1 - sp.cos(angle)) * (k * k)

    rot = sp.eye(3)
    origin = sp.Matrix([0, 0, 0])
    kinetic = sp.Integer(0)
    potential = sp.Integer(0)
    omega_par = sp.Matrix([0, 0, 0])
    omegas = []
    for j, link in enumerate(links):
        joint_pos = origin + rot * sp.Matrix(link["location"])
        axis_world = rot * sp.Matrix(link["axis"])
        if link["joint"] == "revolute":
            link_rot = rodrigues(list(axis_world), q[j]) * rot
            link_origin = joint_pos
            omega = omega_par + qd[j] * axis_world
        else:
            link_rot = rot
            link_origin = joint_pos + q[j] * axis_world
            omega = omega_par
        com = link_origin + link_rot * sp.Matrix(link["com_offset"])
        vel = sp.zeros(3, 1)
        for k in range(n):
            vel += com.diff(q[k]) * qd[k]
        inertia_world = link_rot * sp.Matrix(link["inertia"]) * link_rot.T
        kinetic += sp.Rational(1, 2) * link["mass"] * (vel.T * vel)[0, 0]
        kinetic += sp.Rational(1, 2) * (omega.T * inertia_world * omega)[0, 0]
        potential += -link["mass"] * (sp.Matrix(gravity).T * com)[0, 0]
        omegas.append(omega)
        rot, origin, omega_par = link_rot, link_origin, omega

    mass_matrix = sp.zeros(n, n)
    for i in range(n):
        for j in range(n):
            mass_matrix[i, j] = sp.diff(kinetic, qd[i], qd[j])
    bias = sp.zeros(n, 1)
    for i in range(n):
        mdot_qd = sp.Integer(0)
        for j in range(n):
            for k in range(n):
                mdot_qd += sp.diff(mass_matrix[i, j], q[k]) * qd[k] * qd[j]
        bias[i] = mdot_qd - sp.diff(kinetic, q[i]) + sp.diff(potential, q[i])

    m_fn = sp.lambdify((q, qd), mass_matrix, "numpy")
    c_fn = sp.lambdify((q, qd), bias, "numpy")

    def qdd(qv, qdv, uv):
        m = np.asarray(m_fn(tuple(qv), tuple(qdv)), dtype=float)
        c = np.asarray(c_fn(tuple(qv), tuple(qdv)), dtype=float).ravel()
        return np.linalg.solve(m, np.asarray(uv, dtype=float) - c)

    return qdd


def spike_body(alpha, speed, length=1.0):
    """Body whose advancement bound is `speed` while it truly closes at alpha*speed.

    A slim spike along an oblique axis u spins about u: the apex sits on the
    rotation axis, so it translates exactly at the linear velocity, while the
    spin inflates the advancement denominator by (1-alpha)*speed.
    """
    from polysim.bodies import RigidBody
    from polysim.polytope import build_polytope, uniform_density_mass_properties

    u = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
    side = np.array([0.0, 1.0, 0.0])
    third = np.cross(u, side)
    base_center = -0.4 * length * u
    ring = [base_center + 0.08 * length * (np.cos(t) * side + np.sin(t) * third)
            for t in np.linspace(0.0, 2 * np.pi, 6, endpoint=False)]
    pts = np.vstack([length * u, ring])
    poly = build_polytope(pts)
    _, com, inertia = uniform_density_mass_properties(poly, 1.0)
    poly = build_polytope(poly.vertices - com)
    arm = float(np.linalg.norm(length * u - com))
    assert abs(poly.bounding_radius - arm) < 1e-12  # apex is the farthest vertex
    omega_mag = np.sqrt(2.0) * (1.0 - alpha) * speed / arm
    body = RigidBody(
        "spike", poly, 1.0, inertia,
        Pose(-com, np.array([1.0, 0.0, 0.0, 0.0])),
        np.array([alpha * speed, 0.0, 0.0]),
        omega_mag * u,
    )
    return body, arm


def screw_poses(pose, linear_velocity, angular_velocity, times):
    """Exact constant-twist sweep of a pose (oracle for safety checks)."""
    r0 = pose.rotation()
    out = []
    for t in np.atleast_1d(times):
        dr = quaternions.rotation_about_axis_exact(angular_velocity, float(t))
        r = dr @ r0
        pos = pose.position + float(t) * np.asarray(linear_velocity, dtype=float)
        out.append((pos, r))
    return out

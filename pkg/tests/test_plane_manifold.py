import numpy as np
import pytest

from polysim import quaternions
from polysim.contact import BodyTwist
from polysim.distance import PenetrationError, pairwise_distance
from polysim.manifold import contact_manifold, farthest_manifold_point, ContactManifold, ContactPoint
from polysim.polytope import Pose, box, build_polytope, regular_solid
from polysim.separating import separating_plane, vertices_off_plane

from conftest import random_com_polytope, random_pose

EPS = 1e-8

CUBE = box([0.5, 0.5, 0.5])
GROUND = box([5.0, 5.0, 0.5])
GROUND_POSE = Pose.identity([0.0, 0.0, -1.0])  # top face at z = -0.5


def resting_cube_setup():
    pose_a = Pose.identity()
    dist = pairwise_distance(CUBE, pose_a, GROUND, GROUND_POSE)
    plane = separating_plane(CUBE, pose_a, GROUND, GROUND_POSE, dist)
    return pose_a, dist, plane


def test_plane_for_resting_cube():
    # spec orientation: normal points from A toward B; here A is the cube on top
    _, _, plane = resting_cube_setup()
    assert np.allclose(plane.normal, [0.0, 0.0, -1.0], atol=1e-12)
    assert plane.offset == pytest.approx(0.5, abs=1e-12)
    assert plane.uniqueness == "face_face"
    assert len(plane.touching_points_A) == 4
    assert len(plane.touching_points_B) == 4
    assert np.max(np.abs(plane.height(plane.touching_points_A))) < EPS


def test_plane_with_cube_as_upper_body_matches_sign_convention():
    # ground listed first: normal points from ground (A) toward cube (B): +z
    dist = pairwise_distance(GROUND, GROUND_POSE, CUBE, Pose.identity())
    plane = separating_plane(GROUND, GROUND_POSE, CUBE, Pose.identity(), dist)
    assert np.allclose(plane.normal, [0.0, 0.0, 1.0], atol=1e-12)
    assert plane.offset == pytest.approx(-0.5, abs=1e-12)
    assert plane.uniqueness == "face_face"


def test_plane_for_disjoint_cubes_bisects_witness_segment():
    pose_b = Pose.identity([3.0, 0.0, 0.0])
    dist = pairwise_distance(CUBE, Pose.identity(), CUBE, pose_b)
    plane = separating_plane(CUBE, Pose.identity(), CUBE, pose_b, dist)
    assert plane.uniqueness == "disjoint"
    assert np.allclose(plane.normal, [1.0, 0.0, 0.0], atol=1e-12)
    assert plane.offset == pytest.approx(1.5, abs=1e-12)


def test_corner_to_corner_is_degenerate_vertex_vertex():
    pose_b = Pose.identity([1.0, 1.0, 1.0])
    dist = pairwise_distance(CUBE, Pose.identity(), CUBE, pose_b)
    plane = separating_plane(CUBE, Pose.identity(), CUBE, pose_b, dist)
    assert plane.uniqueness == "degenerate_vertex_vertex"
    assert plane.degenerate


def test_plane_sign_convention_random_disjoint_pairs():
    rng = np.random.default_rng(31)
    done = 0
    while done < 200:
        pa = random_com_polytope(rng, rng.integers(4, 14))
        pb = random_com_polytope(rng, rng.integers(4, 14))
        pose_a = random_pose(rng)
        pose_b = random_pose(rng, center=rng.normal(size=3) * 3.0)
        try:
            dist = pairwise_distance(pa, pose_a, pb, pose_b)
        except PenetrationError:
            continue
        if dist.distance <= EPS:
            continue
        plane = separating_plane(pa, pose_a, pb, pose_b, dist)
        ha = plane.height(pa.world_vertices(pose_a))
        hb = plane.height(pb.world_vertices(pose_b))
        assert ha.max() <= 1e-9
        assert hb.min() >= -1e-9
        done += 1


def manifold_for(poly_a, pose_a, poly_b, pose_b, twist_a=None, twist_b=None):
    dist = pairwise_distance(poly_a, pose_a, poly_b, pose_b)
    plane = separating_plane(poly_a, pose_a, poly_b, pose_b, dist)
    ta = twist_a or BodyTwist.zero(pose_a.position)
    tb = twist_b or BodyTwist.zero(pose_b.position)
    return contact_manifold(poly_a, pose_a, ta, poly_b, pose_b, tb, plane, EPS)


def test_cube_flat_on_ground_manifold():
    m = manifold_for(CUBE, Pose.identity(), GROUND, GROUND_POSE)
    assert len(m) == 4
    corners = m.positions()
    expected = {(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)}
    got = {(round(p[0], 9), round(p[1], 9)) for p in corners}
    assert got == expected
    assert np.allclose(corners[:, 2], -0.5, atol=1e-9)
    assert all(abs(p.gap) <= 2 * EPS for p in m.points)
    assert all(abs(p.normal_velocity) < 1e-12 for p in m.points)


def test_cube_on_edge_manifold_has_two_points():
    q = quaternions.from_axis_angle([1, 0, 0], np.pi / 4)
    pose = Pose([0.0, 0.0, np.sqrt(0.5) - 0.5], q)  # edge resting on z = -0.5
    m = manifold_for(CUBE, pose, GROUND, GROUND_POSE)
    assert len(m) == 2
    xs = sorted(p.position[0] for p in m.points)
    assert xs == pytest.approx([-0.5, 0.5], abs=1e-9)


def test_vertex_on_face_manifold_has_one_point():
    octa = regular_solid("octahedron", radius=1.0)
    m = manifold_for(octa, Pose.identity([0.3, 0.1, 0.5]), GROUND, GROUND_POSE)
    assert len(m) == 1
    assert np.allclose(m.points[0].position, [0.3, 0.1, -0.5], atol=1e-9)


def test_offset_face_face_overlap_is_clipped_polygon():
    # cube shifted so only a 0.6 x 1.0 strip overlaps a second cube's top face
    upper = Pose.identity([0.4, 0.0, 1.0])
    m = manifold_for(CUBE, upper, CUBE, Pose.identity())
    assert len(m) == 4
    xs = np.array(sorted(p.position[0] for p in m.points))
    assert xs == pytest.approx([-0.1, -0.1, 0.5, 0.5], abs=1e-9)
    # labels must identify feature origin, mixing vertices and edge crossings
    kinds = {p.label[0][0] for p in m.points} | {p.label[1][0] for p in m.points}
    assert "v" in kinds


def test_normal_velocity_sign_convention():
    # cube moving straight up (separating) must report positive gap rate
    twist_up = BodyTwist(np.array([0.0, 0.0, 1.0]), np.zeros(3), np.zeros(3))
    m = manifold_for(CUBE, Pose.identity(), GROUND, GROUND_POSE, twist_a=twist_up)
    assert all(p.normal_velocity == pytest.approx(1.0, abs=1e-12) for p in m.points)
    # moving down (approaching) is negative
    twist_down = BodyTwist(np.array([0.0, 0.0, -1.0]), np.zeros(3), np.zeros(3))
    m = manifold_for(CUBE, Pose.identity(), GROUND, GROUND_POSE, twist_a=twist_down)
    assert all(p.normal_velocity == pytest.approx(-1.0, abs=1e-12) for p in m.points)


def test_manifold_points_inside_both_projections():
    rng = np.random.default_rng(99)
    for _ in range(60):
        # drop a random polytope onto the ground so its lowest vertex touches z=-0.5
        poly = random_com_polytope(rng, rng.integers(4, 12))
        pose0 = random_pose(rng)
        low = poly.world_vertices(pose0)[:, 2].min()
        pose = Pose(pose0.position - [0, 0, low + 0.5], pose0.orientation)
        m = manifold_for(poly, pose, GROUND, GROUND_POSE)
        assert len(m) >= 1
        assert len(m) <= poly.vertex_count + GROUND.vertex_count
        from scipy.spatial import ConvexHull

        def cross2(a, b):
            return a[0] * b[1] - a[1] * b[0]

        for p in m.points:
            pa = poly.world_vertices(pose)
            # point must lie within the body's plane-projected hull (z coords ignored)
            hull = ConvexHull(pa[:, :2])
            hp = pa[hull.vertices][:, :2]
            c = hp.mean(axis=0)
            for i in range(len(hp)):
                a, b = hp[i], hp[(i + 1) % len(hp)]
                if cross2(b - a, c - a) > 0:
                    assert cross2(b - a, p.position[:2] - a) >= -1e-9


def test_farthest_manifold_point_examples():
    plane = None
    pts = [
        ContactPoint(np.array([0.5, 0.5, 0.0]), 0.0, 0.0, ()),
        ContactPoint(np.array([-0.5, 0.5, 0.0]), 0.0, 0.0, ()),
        ContactPoint(np.array([-0.5, -0.5, 0.0]), 0.0, 0.0, ()),
        ContactPoint(np.array([0.5, -0.5, 0.0]), 0.0, 0.0, ()),
    ]
    m = ContactManifold(plane, pts)
    xi = farthest_manifold_point(m, np.array([0.5, 0.5, 1.0]))
    assert np.allclose(xi, [-0.5, -0.5, 0.0])
    # exhaustive dominance
    for p in pts:
        assert np.linalg.norm(np.array([0.5, 0.5, 1.0]) - xi) >= np.linalg.norm(np.array([0.5, 0.5, 1.0]) - p.position)
    # single point
    single = ContactManifold(plane, [pts[0]])
    assert np.allclose(farthest_manifold_point(single, np.zeros(3)), pts[0].position)
    # tie: equidistant from first two -> lowest index wins
    m2 = ContactManifold(plane, [pts[0], pts[1]])
    xi = farthest_manifold_point(m2, np.array([0.0, 0.0, 0.0]))
    assert np.allclose(xi, pts[0].position)
    with pytest.raises(ValueError):
        farthest_manifold_point(ContactManifold(plane, []), np.zeros(3))


def test_vertices_off_plane_cube_flat():
    pose_a, dist, plane = resting_cube_setup()
    off = vertices_off_plane(CUBE, pose_a, GROUND, GROUND_POSE, plane)
    cube_off = [o for o in off if o.owner == "A"]
    assert len(cube_off) == 4
    assert all(o.plane_distance == pytest.approx(1.0, abs=1e-12) for o in cube_off)
    ground_off = [o for o in off if o.owner == "B"]
    assert len(ground_off) == 4  # bottom vertices of the ground slab
    assert all(o.plane_distance == pytest.approx(1.0, abs=1e-12) for o in ground_off)


def test_vertices_off_plane_tetrahedron_apex():
    tet = build_polytope([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1.0 / 3, 1.0 / 3, 1.0]])
    ground = box([5, 5, 0.5])
    pose_t = Pose.identity([0, 0, 0])
    pose_g = Pose.identity([0, 0, -0.5])  # ground top at z = 0, tet base on it
    dist = pairwise_distance(tet, pose_t, ground, pose_g)
    plane = separating_plane(tet, pose_t, ground, pose_g, dist)
    off = [o for o in vertices_off_plane(tet, pose_t, ground, pose_g, plane) if o.owner == "A"]
    assert len(off) == 1
    assert off[0].plane_distance == pytest.approx(1.0, abs=1e-12)

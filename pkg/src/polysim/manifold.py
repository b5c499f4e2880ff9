"""Contact manifold extraction: intersection of the touching regions of two
polytopes on their separating plane.

Both bodies' vertices within the touching tolerance of the plane are projected
into plane coordinates; the manifold is the intersection of the two convex
regions (point, segment or polygon on either side).  Every manifold point
carries a structural label naming the generating features, which is what the
simulator compares to detect manifold changes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import clip2d
from .contact import BodyTwist, relative_normal_velocity
from .polytope import ConvexPolytope, Pose
from .separating import SeparatingPlane, plane_basis


@dataclass
class ContactPoint:
    position: np.ndarray  # world, on the separating plane
    gap: float  # surface separation at the point, >= 0 up to tolerance
    normal_velocity: float  # rate of gap opening (positive = separating)
    label: tuple  # (side_a, side_b) feature labels, structural identity


@dataclass
class ContactManifold:
    plane: SeparatingPlane
    points: list[ContactPoint]

    def __len__(self) -> int:
        return len(self.points)

    def positions(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.array([p.position for p in self.points])

    def structure(self) -> frozenset:
        return frozenset(p.label for p in self.points)


def touching_region_2d(poly: ConvexPolytope, pose: Pose, plane: SeparatingPlane, tol: float, u, v):
    """Plane-projected touching vertices of one body, polygon-ordered.

    Returns (ids, points2d, heights) with heights the signed plane offsets.
    """
    verts = poly.world_vertices(pose)
    heights = verts @ plane.normal - plane.offset
    keep = np.where(np.abs(heights) <= tol)[0]
    ids = [int(i) for i in keep]
    pts = np.column_stack([verts[keep] @ u, verts[keep] @ v]) if ids else np.zeros((0, 2))
    ids, pts = clip2d.order_convex(ids, pts)
    h = heights[np.array(ids, dtype=int)] if ids else np.zeros(0)
    return ids, pts, h


def _height_model(pts2: np.ndarray, heights: np.ndarray):
    """Affine model h(x, y) over a touching region; exact for planar features."""
    if len(pts2) == 0:
        return np.zeros(3)
    design = np.column_stack([pts2, np.ones(len(pts2))])
    coeffs, *_ = np.linalg.lstsq(design, heights, rcond=None)
    return coeffs


def contact_manifold(
    poly_a: ConvexPolytope,
    pose_a: Pose,
    twist_a: BodyTwist,
    poly_b: ConvexPolytope,
    pose_b: Pose,
    twist_b: BodyTwist,
    plane: SeparatingPlane,
    touch_tolerance: float,
) -> ContactManifold:
    """Vertices of the intersection of the two touching regions on the plane.

    Returns an empty manifold when no feature of either body is within the
    tolerance of the plane (stale inputs).
    """
    u, v = plane_basis(plane.normal)
    ids_a, pts_a, heights_a = touching_region_2d(poly_a, pose_a, plane, touch_tolerance, u, v)
    ids_b, pts_b, heights_b = touching_region_2d(poly_b, pose_b, plane, touch_tolerance, u, v)
    kept = clip2d.intersect_labeled(ids_a, pts_a, ids_b, pts_b)
    if not kept:
        return ContactManifold(plane, [])
    model_a = _height_model(pts_a, heights_a)
    model_b = _height_model(pts_b, heights_b)

    pts2 = np.array([p for p, _ in kept])
    if len(kept) >= 3:
        centroid = pts2.mean(axis=0)
        rel = pts2 - centroid
        order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]), kind="stable")
    else:
        order = np.argsort([str(lbl) for _, lbl in kept], kind="stable")

    origin = plane.offset * plane.normal
    contact_normal = -plane.normal  # oriented so the gap and its rate are >= 0 when open
    points: list[ContactPoint] = []
    for idx in order:
        xy, label = kept[int(idx)]
        world = origin + xy[0] * u + xy[1] * v
        # surface separation from the per-body affine height models: equals
        # the gap n_c . (p_A - p_B) between the touching surfaces at the point
        h_a = model_a[0] * xy[0] + model_a[1] * xy[1] + model_a[2]
        h_b = model_b[0] * xy[0] + model_b[1] * xy[1] + model_b[2]
        gap = float(h_b - h_a)
        rate = relative_normal_velocity(twist_a, twist_b, world, contact_normal)
        points.append(ContactPoint(world, gap, rate, label))
    return ContactManifold(plane, points)


def farthest_manifold_point(manifold: ContactManifold, r: np.ndarray) -> np.ndarray:
    """Manifold point farthest from r; ties resolved to the lowest point index."""
    if not manifold.points:
        raise ValueError("empty contact manifold")
    positions = manifold.positions()
    dists = np.linalg.norm(positions - np.asarray(r, dtype=float), axis=1)
    return positions[int(np.argmax(dists))].copy()

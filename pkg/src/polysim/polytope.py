"""Convex polytope geometry: vertices, polygonal faces, edges, mass properties.

Polytopes are built from a raw vertex cloud with scipy's convex hull; coplanar
hull facets are merged into polygonal faces wound counterclockwise about their
outward normals.  The body-frame origin is expected to coincide with the
center of mass (the bounding radius is measured about it).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import quaternions

COPLANAR_TOL = 1e-10


class GeometryError(ValueError):
    """Raised for degenerate or invalid polytope input."""


@dataclass(frozen=True)
class Pose:
    """Rigid placement: world position plus unit quaternion orientation."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        q = np.asarray(self.orientation, dtype=float)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise GeometryError(f"orientation quaternion norm {n} is not 1")
        object.__setattr__(self, "orientation", q / n)

    @staticmethod
    def identity(position=(0.0, 0.0, 0.0)) -> "Pose":
        return Pose(np.asarray(position, dtype=float), quaternions.IDENTITY.copy())

    @staticmethod
    def trusted(position: np.ndarray, orientation: np.ndarray) -> "Pose":
        """Construct without validation; for hot paths with known-unit quaternions."""
        pose = object.__new__(Pose)
        object.__setattr__(pose, "position", position)
        object.__setattr__(pose, "orientation", orientation)
        return pose

    def rotation(self) -> np.ndarray:
        cached = getattr(self, "_rotation", None)
        if cached is None:
            cached = quaternions.to_matrix(self.orientation)
            object.__setattr__(self, "_rotation", cached)
        return cached

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map body-frame points (n,3) to world frame."""
        return np.asarray(points, dtype=float) @ self.rotation().T + self.position

    def inverse_transform(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.position) @ self.rotation()


@dataclass
class Face:
    vertex_ids: tuple[int, ...]
    normal: np.ndarray  # outward unit normal, body frame
    offset: float  # normal . x = offset on the face plane


@dataclass
class Edge:
    vertex_ids: tuple[int, int]  # sorted pair
    face_ids: tuple[int, int]


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors without numpy's generic-axis overhead."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


@dataclass
class ConvexPolytope:
    vertices: np.ndarray  # (n, 3) body frame
    faces: list[Face]
    edges: list[Edge]
    bounding_radius: float
    _edge_index: dict[tuple[int, int], int] = field(default_factory=dict, repr=False)
    # derived query data, filled by _finalize
    face_normals: np.ndarray = None  # (F, 3)
    face_offsets: np.ndarray = None  # (F,)
    unique_edge_dirs: np.ndarray = None  # (m, 3) unit, deduped up to sign
    face_boundaries: list = None  # per face: (M (k,3), c (k,)): inside iff M x >= c
    boundary_matrix: np.ndarray = None  # (F, k_max, 3), zero-padded
    boundary_offsets: np.ndarray = None  # (F, k_max), padded rows trivially satisfied

    def _finalize(self) -> None:
        self.face_normals = np.array([f.normal for f in self.faces])
        self.face_offsets = np.array([f.offset for f in self.faces])
        dirs = []
        for e in self.edges:
            d = self.vertices[e.vertex_ids[1]] - self.vertices[e.vertex_ids[0]]
            d = d / np.linalg.norm(d)
            if not any(abs(float(d @ u)) > 1.0 - 1e-12 for u in dirs):
                dirs.append(d)
        self.unique_edge_dirs = np.array(dirs)
        self.face_boundaries = []
        for f in self.faces:
            rows = []
            offs = []
            ids = f.vertex_ids
            for i in range(len(ids)):
                a = self.vertices[ids[i]]
                b = self.vertices[ids[(i + 1) % len(ids)]]
                m = cross3(f.normal, b - a)
                rows.append(m)
                offs.append(float(m @ a))
            self.face_boundaries.append((np.array(rows), np.array(offs)))
        k_max = max(len(rows) for rows, _ in self.face_boundaries)
        self.boundary_matrix = np.zeros((len(self.faces), k_max, 3))
        self.boundary_offsets = np.full((len(self.faces), k_max), -1.0)
        for fid, (rows, offs) in enumerate(self.face_boundaries):
            self.boundary_matrix[fid, :len(rows)] = rows
            self.boundary_offsets[fid, :len(offs)] = offs

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def world_vertices(self, pose: Pose) -> np.ndarray:
        return pose.transform(self.vertices)

    def face_normals_world(self, pose: Pose) -> np.ndarray:
        r = pose.rotation()
        return np.array([f.normal for f in self.faces]) @ r.T

    def edge_vertex_pairs(self) -> np.ndarray:
        return np.array([e.vertex_ids for e in self.edges], dtype=int)

    def edge_id(self, v0: int, v1: int) -> int:
        return self._edge_index[(min(v0, v1), max(v0, v1))]

    def validate(self) -> None:
        """Check the structural invariants; raises GeometryError on failure."""
        v, e, f = len(self.vertices), len(self.edges), len(self.faces)
        if v - e + f != 2:
            raise GeometryError(f"Euler check failed: V={v} E={e} F={f}")
        hull = ConvexHull(self.vertices)
        if len(hull.vertices) != v:
            raise GeometryError("polytope has interior or redundant vertices")
        for face in self.faces:
            pts = self.vertices[list(face.vertex_ids)]
            residual = np.abs(pts @ face.normal - face.offset)
            if residual.max() > COPLANAR_TOL:
                raise GeometryError(f"face not coplanar within {COPLANAR_TOL}")
            if abs(np.linalg.norm(face.normal) - 1.0) > 1e-12:
                raise GeometryError("face normal not unit length")
            # counterclockwise winding about the outward normal
            centroid = pts.mean(axis=0)
            for i in range(len(pts)):
                a = pts[i] - centroid
                b = pts[(i + 1) % len(pts)] - centroid
                if np.cross(a, b) @ face.normal <= 0.0:
                    raise GeometryError("face winding is not counterclockwise")
        max_norm = float(np.linalg.norm(self.vertices, axis=1).max())
        if self.bounding_radius < max_norm * (1.0 - 1e-12):
            raise GeometryError("bounding radius smaller than farthest vertex")


def build_polytope(points) -> ConvexPolytope:
    """Build a polytope from a vertex cloud.

    Vertices interior to the hull (or duplicated) are dropped; faces are the
    merged coplanar hull facets.  Degenerate (flat or collinear) input raises
    GeometryError.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 4:
        raise GeometryError("need at least 4 points of dimension 3")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise GeometryError(f"degenerate vertex set: {exc}") from exc

    keep = np.sort(hull.vertices)
    remap = {int(old): new for new, old in enumerate(keep)}
    vertices = pts[keep]

    # Group hull facets by plane equation (outward normal, offset).
    groups: list[dict] = []
    for simplex, eq in zip(hull.simplices, hull.equations):
        normal = eq[:3]
        offset = -eq[3]
        placed = False
        for g in groups:
            if np.dot(g["normal"], normal) > 1.0 - 1e-9 and abs(g["offset"] - offset) < 1e-9 * max(1.0, abs(offset)):
                g["vids"].update(int(i) for i in simplex)
                placed = True
                break
        if not placed:
            groups.append({"normal": normal.copy(), "offset": float(offset), "vids": {int(i) for i in simplex}})

    faces: list[Face] = []
    for g in groups:
        normal = g["normal"] / np.linalg.norm(g["normal"])
        vids = [remap[i] for i in sorted(g["vids"])]
        face_pts = vertices[vids]
        offset = float(np.mean(face_pts @ normal))
        # order counterclockwise about the outward normal
        centroid = face_pts.mean(axis=0)
        u = face_pts[0] - centroid
        u = u / np.linalg.norm(u)
        v = np.cross(normal, u)
        rel = face_pts - centroid
        angles = np.arctan2(rel @ v, rel @ u)
        order = np.argsort(angles)
        faces.append(Face(tuple(vids[i] for i in order), normal, offset))

    # Edges: consecutive vertex pairs along each face boundary, shared by two faces.
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for fid, face in enumerate(faces):
        ids = face.vertex_ids
        for i in range(len(ids)):
            a, b = ids[i], ids[(i + 1) % len(ids)]
            key = (min(a, b), max(a, b))
            edge_faces.setdefault(key, []).append(fid)
    edges: list[Edge] = []
    edge_index: dict[tuple[int, int], int] = {}
    for key in sorted(edge_faces):
        fids = edge_faces[key]
        if len(fids) != 2:
            raise GeometryError(f"edge {key} shared by {len(fids)} faces, expected 2")
        edge_index[key] = len(edges)
        edges.append(Edge(key, (fids[0], fids[1])))

    radius = float(np.linalg.norm(vertices, axis=1).max())
    poly = ConvexPolytope(vertices, faces, edges, radius, edge_index)
    poly._finalize()
    poly.validate()
    return poly


def box(half_extents) -> ConvexPolytope:
    hx, hy, hz = np.asarray(half_extents, dtype=float)
    if min(hx, hy, hz) <= 0.0:
        raise GeometryError("box half extents must be positive")
    corners = np.array([
        [sx * hx, sy * hy, sz * hz]
        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
    ])
    return build_polytope(corners)


def regular_solid(kind: str, radius: float = 1.0) -> ConvexPolytope:
    """Regular polytope with the given circumradius, centered on its centroid."""
    if radius <= 0.0:
        raise GeometryError("radius must be positive")
    if kind == "tetrahedron":
        pts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    elif kind == "octahedron":
        pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    elif kind == "cube":
        pts = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    elif kind == "icosahedron":
        phi = (1.0 + np.sqrt(5.0)) / 2.0
        pts = []
        for a, b in [(1.0, phi)]:
            pts += [[0, s1 * a, s2 * b] for s1 in (-1, 1) for s2 in (-1, 1)]
            pts += [[s1 * a, s2 * b, 0] for s1 in (-1, 1) for s2 in (-1, 1)]
            pts += [[s2 * b, 0, s1 * a] for s1 in (-1, 1) for s2 in (-1, 1)]
        pts = np.asarray(pts, dtype=float)
    else:
        raise GeometryError(f"unknown regular solid '{kind}'")
    pts = pts * (radius / np.linalg.norm(pts, axis=1).max())
    return build_polytope(pts)


def uniform_density_mass_properties(poly: ConvexPolytope, mass: float):
    """Volume, center of mass and inertia tensor of a uniform-density polytope.

    Integrals evaluated by the divergence theorem over the triangulated
    surface.  The inertia tensor is returned about the center of mass, in the
    body frame, scaled to the requested total mass.
    """
    verts = poly.vertices
    # signed tetrahedron integrals against the origin (faces wound outward)
    volume = 0.0
    first = np.zeros(3)
    second = np.zeros((3, 3))  # S_uv = integral of x_u x_v dV
    for face in poly.faces:
        ids = face.vertex_ids
        for i in range(1, len(ids) - 1):
            a, b, c = verts[ids[0]], verts[ids[i]], verts[ids[i + 1]]
            d6 = float(np.dot(a, np.cross(b, c)))  # 6 * signed tet volume
            volume += d6 / 6.0
            first += d6 / 24.0 * (a + b + c)
            direct = np.outer(a, a) + np.outer(b, b) + np.outer(c, c)
            cross = np.outer(a, b) + np.outer(b, a) + np.outer(a, c) + np.outer(c, a) + np.outer(b, c) + np.outer(c, b)
            second += d6 / 60.0 * (direct + 0.5 * cross)
    if volume <= 0.0:
        raise GeometryError("polytope volume is not positive")
    com = first / volume
    density = mass / volume
    inertia_origin = density * (np.trace(second) * np.eye(3) - second)
    # parallel-axis shift to the center of mass
    shift = mass * (np.dot(com, com) * np.eye(3) - np.outer(com, com))
    return float(volume), com, inertia_origin - shift

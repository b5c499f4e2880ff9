"""Labeled intersection of convex regions in plane coordinates.

Regions are the plane projections of a polytope's touching vertices: a point,
a segment, or a convex polygon (ordered counterclockwise).  The intersection
of two regions is returned as labeled points; each label records how the
point arises on each side: at one of the region's vertices ("v", vertex_id),
on a region edge ("e", (v0, v1)), or in the region's interior ("i",).
"""
from __future__ import annotations

import numpy as np

MERGE_TOL = 1e-9


def cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def order_convex(ids: list[int], pts: np.ndarray):
    """Order region points counterclockwise when they form a polygon."""
    if len(pts) >= 3:
        centroid = pts.mean(axis=0)
        rel = pts - centroid
        order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))
        return [ids[i] for i in order], pts[order]
    return list(ids), pts


def contains(pts: np.ndarray, p: np.ndarray, tol: float = MERGE_TOL) -> bool:
    k = len(pts)
    if k == 0:
        return False
    if k == 1:
        return float(np.linalg.norm(p - pts[0])) <= tol
    if k == 2:
        ab = pts[1] - pts[0]
        denom = float(ab @ ab)
        t = float(np.clip((p - pts[0]) @ ab / denom, 0.0, 1.0)) if denom > 0 else 0.0
        return float(np.linalg.norm(p - (pts[0] + t * ab))) <= tol
    for i in range(k):
        a = pts[i]
        b = pts[(i + 1) % k]
        edge = b - a
        if cross2(edge, p - a) < -tol * max(float(np.linalg.norm(edge)), 1e-30):
            return False
    return True


def region_edges(ids: list[int], pts: np.ndarray):
    k = len(pts)
    if k < 2:
        return []
    if k == 2:
        return [((ids[0], ids[1]), pts[0], pts[1])]
    out = []
    for i in range(k):
        j = (i + 1) % k
        out.append(((ids[i], ids[j]), pts[i], pts[j]))
    return out


def segment_crossing(a0, a1, b0, b1, tol: float = MERGE_TOL):
    r = a1 - a0
    s = b1 - b0
    denom = cross2(r, s)
    lr = float(np.linalg.norm(r))
    ls = float(np.linalg.norm(s))
    if abs(denom) <= 1e-12 * lr * ls:
        return None
    q = b0 - a0
    t = cross2(q, s) / denom
    w = cross2(q, r) / denom
    slack_t = tol / max(lr, 1e-30)
    slack_w = tol / max(ls, 1e-30)
    if -slack_t <= t <= 1.0 + slack_t and -slack_w <= w <= 1.0 + slack_w:
        return a0 + t * r
    return None


def intersect_labeled(ids_a: list[int], pts_a: np.ndarray, ids_b: list[int], pts_b: np.ndarray):
    """Intersection points of two convex regions with per-side feature labels.

    Returns a list of (xy, (label_a, label_b)); coincident points are merged
    with vertex labels taking precedence over edge and interior labels.
    """
    if len(ids_a) == 0 or len(ids_b) == 0:
        return []
    candidates: list[tuple[np.ndarray, tuple]] = []
    for i, ia in enumerate(ids_a):
        if contains(pts_b, pts_a[i]):
            candidates.append((pts_a[i], (("v", ia), ("i",))))
    for i, ib in enumerate(ids_b):
        if contains(pts_a, pts_b[i]):
            candidates.append((pts_b[i], (("i",), ("v", ib))))
    for (ea, a0, a1) in region_edges(ids_a, pts_a):
        for (eb, b0, b1) in region_edges(ids_b, pts_b):
            p = segment_crossing(a0, a1, b0, b1)
            if p is not None:
                ea_key = (min(ea), max(ea))
                eb_key = (min(eb), max(eb))
                candidates.append((p, (("e", ea_key), ("e", eb_key))))

    def rank(side_label) -> int:
        return {"v": 0, "e": 1, "i": 2}[side_label[0]]

    kept: list[tuple[np.ndarray, tuple]] = []
    for p, label in candidates:
        merged = False
        for idx, (q, qlabel) in enumerate(kept):
            if float(np.linalg.norm(p - q)) <= MERGE_TOL:
                best_a = min(label[0], qlabel[0], key=rank)
                best_b = min(label[1], qlabel[1], key=rank)
                kept[idx] = (q, (best_a, best_b))
                merged = True
                break
        if not merged:
            kept.append((p, label))
    return kept

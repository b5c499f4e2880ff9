"""Unit quaternion helpers for body orientations.

Quaternions are stored as numpy arrays [w, x, y, z] with scalar part first.
"""
from __future__ import annotations

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return IDENTITY.copy()
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (world = R @ body)."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])


def integrate(q: np.ndarray, omega: np.ndarray, h: float) -> np.ndarray:
    """First-order orientation update q + (h/2) * omega ⊗ q, renormalized.

    omega is the world-frame angular velocity.  The update rotates about the
    exact axis of omega but by 2*atan(|omega| h / 2) rather than |omega| h,
    which is the documented first-order behaviour.
    """
    omega = np.asarray(omega, dtype=float)
    if not np.any(omega):
        return np.asarray(q, dtype=float).copy()
    dq = 0.5 * h * multiply(np.concatenate(([0.0], omega)), q)
    return normalize(q + dq)


def rotation_about_axis_exact(omega: np.ndarray, t: float) -> np.ndarray:
    """Exact rotation matrix exp([omega] t) via Rodrigues' formula.

    Used by test oracles that sweep the continuous screw motion; the
    simulator itself uses the first-order `integrate` update.
    """
    omega = np.asarray(omega, dtype=float)
    angle = np.linalg.norm(omega) * t
    if angle == 0.0:
        return np.eye(3)
    axis = omega / np.linalg.norm(omega)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)

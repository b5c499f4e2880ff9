"""Rigid bodies, serial articulated chains, and the simulation state.

Free bodies carry world-frame twists about their center of mass (the body
frame origin).  Chains are serial with revolute and prismatic joints; each
link's frame sits at its joint, with the geometry expressed about the link's
center of mass.  Chain dynamics assume a fixed base; base velocities are kept
for kinematic bound computations only.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import quaternions
from .contact import BodyTwist
from .polytope import ConvexPolytope, Pose, cross3


class ModelError(ValueError):
    """Invalid mass properties or articulation description."""


@dataclass
class RigidBody:
    name: str
    polytope: ConvexPolytope
    mass: float
    inertia: np.ndarray  # 3x3, body frame, about the center of mass
    pose: Pose
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    external_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    external_torque: np.ndarray = field(default_factory=lambda: np.zeros(3))
    is_static: bool = False

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        for name in ("linear_velocity", "angular_velocity", "external_force", "external_torque"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.is_static:
            if np.any(self.linear_velocity) or np.any(self.angular_velocity):
                raise ModelError(f"static body '{self.name}' must have zero velocity")
            return
        if self.mass <= 0.0:
            raise ModelError(f"body '{self.name}' needs positive mass")
        eigvals = np.linalg.eigvalsh(0.5 * (self.inertia + self.inertia.T))
        if eigvals.min() <= 0.0:
            raise ModelError(f"body '{self.name}' inertia is not positive definite")

    def world_inertia(self) -> np.ndarray:
        r = self.pose.rotation()
        return r @ self.inertia @ r.T

    def twist(self) -> BodyTwist:
        return BodyTwist(self.linear_velocity.copy(), self.angular_velocity.copy(), self.pose.position.copy())

    def copy(self) -> "RigidBody":
        clone = object.__new__(RigidBody)
        clone.name = self.name
        clone.polytope = self.polytope
        clone.mass = self.mass
        clone.inertia = self.inertia
        clone.pose = Pose.trusted(self.pose.position.copy(), self.pose.orientation.copy())
        clone.linear_velocity = self.linear_velocity.copy()
        clone.angular_velocity = self.angular_velocity.copy()
        clone.external_force = self.external_force
        clone.external_torque = self.external_torque
        clone.is_static = self.is_static
        return clone


@dataclass
class ChainLink:
    joint_type: str  # revolute | prismatic
    joint_axis: np.ndarray  # unit vector, parent frame
    joint_location: np.ndarray  # joint origin, parent frame
    com_offset: np.ndarray  # center of mass in the link (joint) frame
    polytope: ConvexPolytope  # geometry in the COM frame
    mass: float
    inertia: np.ndarray  # 3x3, COM frame

    def __post_init__(self):
        if self.joint_type not in ("revolute", "prismatic"):
            raise ModelError(f"unsupported joint type '{self.joint_type}'")
        self.joint_axis = np.asarray(self.joint_axis, dtype=float)
        n = np.linalg.norm(self.joint_axis)
        if abs(n - 1.0) > 1e-9:
            if n == 0.0:
                raise ModelError("joint axis must be nonzero")
            self.joint_axis = self.joint_axis / n
        self.joint_location = np.asarray(self.joint_location, dtype=float)
        self.com_offset = np.asarray(self.com_offset, dtype=float)
        self.inertia = np.asarray(self.inertia, dtype=float)
        if self.mass <= 0.0:
            raise ModelError("link mass must be positive")
        if np.linalg.eigvalsh(0.5 * (self.inertia + self.inertia.T)).min() <= 0.0:
            raise ModelError("link inertia is not positive definite")


@dataclass
class LinkFrame:
    """World-frame kinematics of one link at the current configuration."""

    joint_position: np.ndarray
    joint_axis: np.ndarray
    origin: np.ndarray  # link frame origin (joint position after prismatic slide)
    rotation: np.ndarray
    com: np.ndarray


@dataclass
class MultibodyChain:
    name: str
    base_pose: Pose
    links: list[ChainLink]
    q: np.ndarray
    qd: np.ndarray
    applied_forces: np.ndarray = None  # u, one entry per joint
    base_fixed: bool = True
    base_linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    self_collision: bool = True

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        if self.applied_forces is None:
            self.applied_forces = np.zeros(len(self.links))
        self.applied_forces = np.asarray(self.applied_forces, dtype=float)
        n = len(self.links)
        if not (len(self.q) == len(self.qd) == len(self.applied_forces) == n):
            raise ModelError(f"chain '{self.name}': coordinate vectors must have length {n}")
        self.base_linear_velocity = np.asarray(self.base_linear_velocity, dtype=float)
        self.base_angular_velocity = np.asarray(self.base_angular_velocity, dtype=float)

    @property
    def dof(self) -> int:
        return len(self.links)

    def forward_kinematics(self) -> list[LinkFrame]:
        frames: list[LinkFrame] = []
        rot = self.base_pose.rotation()
        origin = self.base_pose.position
        for j, link in enumerate(self.links):
            joint_pos = origin + rot @ link.joint_location
            axis = rot @ link.joint_axis
            if link.joint_type == "revolute":
                dq = quaternions.rotation_about_axis_exact(axis * self.q[j], 1.0)
                link_rot = dq @ rot
                link_origin = joint_pos
            else:
                link_rot = rot
                link_origin = joint_pos + self.q[j] * axis
            com = link_origin + link_rot @ link.com_offset
            frames.append(LinkFrame(joint_pos, axis, link_origin, link_rot, com))
            rot = link_rot
            origin = link_origin
        return frames

    def joint_world_locations(self, frames: list[LinkFrame] | None = None) -> np.ndarray:
        """World positions of every joint; the base location for an empty chain."""
        frames = frames or self.forward_kinematics()
        if not frames:
            return self.base_pose.position[None, :].copy()
        return np.array([f.joint_position for f in frames])

    def point_jacobian(self, link_index: int, point: np.ndarray, frames: list[LinkFrame] | None = None) -> np.ndarray:
        """3 x dof linear-velocity Jacobian of a world point on the given link."""
        frames = frames or self.forward_kinematics()
        jac = np.zeros((3, self.dof))
        for k in range(link_index + 1):
            f = frames[k]
            if self.links[k].joint_type == "revolute":
                jac[:, k] = cross3(f.joint_axis, point - f.joint_position)
            else:
                jac[:, k] = f.joint_axis
        return jac

    def angular_jacobian(self, link_index: int, frames: list[LinkFrame] | None = None) -> np.ndarray:
        frames = frames or self.forward_kinematics()
        jac = np.zeros((3, self.dof))
        for k in range(link_index + 1):
            if self.links[k].joint_type == "revolute":
                jac[:, k] = frames[k].joint_axis
        return jac

    def link_twist(self, link_index: int, frames: list[LinkFrame] | None = None) -> BodyTwist:
        """Instantaneous world twist of a link about its COM, base motion included."""
        frames = frames or self.forward_kinematics()
        f = frames[link_index]
        omega = self.base_angular_velocity.copy()
        linear = self.base_linear_velocity + cross3(self.base_angular_velocity, f.com - self.base_pose.position)
        linear += self.point_jacobian(link_index, f.com, frames) @ self.qd
        omega += self.angular_jacobian(link_index, frames) @ self.qd
        return BodyTwist(linear, omega, f.com.copy())

    def copy(self) -> "MultibodyChain":
        clone = object.__new__(MultibodyChain)
        clone.name = self.name
        clone.base_pose = self.base_pose
        clone.links = self.links
        clone.q = self.q.copy()
        clone.qd = self.qd.copy()
        clone.applied_forces = self.applied_forces
        clone.base_fixed = self.base_fixed
        clone.base_linear_velocity = self.base_linear_velocity
        clone.base_angular_velocity = self.base_angular_velocity
        clone.self_collision = self.self_collision
        return clone


@dataclass(frozen=True)
class CollidableRef:
    """Addresses one collidable: a free body or a single chain link."""

    kind: str  # "body" | "link"
    index: int
    link: int = -1

    def __str__(self) -> str:
        return f"{self.kind}:{self.index}" if self.kind == "body" else f"link:{self.index}[{self.link}]"


@dataclass
class Collidable:
    ref: CollidableRef
    name: str
    polytope: ConvexPolytope
    pose: Pose
    twist: BodyTwist
    is_static: bool


@dataclass
class SystemState:
    time: float = 0.0
    bodies: list[RigidBody] = field(default_factory=list)
    chains: list[MultibodyChain] = field(default_factory=list)

    def copy(self) -> "SystemState":
        return SystemState(self.time, [b.copy() for b in self.bodies], [c.copy() for c in self.chains])

    def collidables(self) -> list[Collidable]:
        out: list[Collidable] = []
        for i, body in enumerate(self.bodies):
            out.append(Collidable(CollidableRef("body", i), body.name, body.polytope, body.pose, body.twist(), body.is_static))
        for i, chain in enumerate(self.chains):
            frames = chain.forward_kinematics()
            for j, link in enumerate(chain.links):
                pose = Pose.trusted(frames[j].com, _rotation_to_quaternion(frames[j].rotation))
                out.append(Collidable(
                    CollidableRef("link", i, j), f"{chain.name}[{j}]",
                    link.polytope, pose, chain.link_twist(j, frames), False,
                ))
        return out


def _rotation_to_quaternion(r: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a unit quaternion (w, x, y, z)."""
    tr = np.trace(r)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] > r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    return quaternions.normalize(np.array([w, x, y, z]))

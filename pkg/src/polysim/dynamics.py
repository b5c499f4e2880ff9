"""Equations of motion and first-order integration primitives.

The stepping order is fixed: positions advance with the old velocities, then
velocities advance with accelerations evaluated at the new positions and old
velocities (semi-implicit ordering).  Free bodies use world-frame
Newton-Euler including the gyroscopic term; serial chains use a Jacobian
mass matrix with a recursive Newton-Euler bias, fixed base only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quaternions
from .bodies import CollidableRef, MultibodyChain, RigidBody, SystemState, ModelError
from .polytope import cross3
from .contact import BodyTwist, point_velocity_rigid


@dataclass
class Accelerations:
    body_linear: list[np.ndarray]
    body_angular: list[np.ndarray]
    chain_qdd: list[np.ndarray]


def chain_mass_matrix(chain: MultibodyChain, frames=None) -> np.ndarray:
    frames = frames or chain.forward_kinematics()
    n = chain.dof
    m = np.zeros((n, n))
    for i, link in enumerate(chain.links):
        jv = chain.point_jacobian(i, frames[i].com, frames)
        jw = chain.angular_jacobian(i, frames)
        r = frames[i].rotation
        inertia_world = r @ link.inertia @ r.T
        m += link.mass * jv.T @ jv + jw.T @ inertia_world @ jw
    return m


def chain_bias(chain: MultibodyChain, gravity: np.ndarray, frames=None) -> np.ndarray:
    """Coriolis, centrifugal and gravity generalized forces (q̈ = 0 sweep).

    Fixed base: the base is given the opposite of gravity as a virtual
    acceleration, which folds gravity into the recursion.
    """
    if not chain.base_fixed:
        raise ModelError(f"chain '{chain.name}': dynamics requires a fixed base")
    frames = frames or chain.forward_kinematics()
    n = chain.dof
    gravity = np.asarray(gravity, dtype=float)

    omegas = []
    alphas = []
    com_accs = []
    omega_p = np.zeros(3)
    alpha_p = np.zeros(3)
    origin_p = chain.base_pose.position
    acc_origin_p = -gravity
    for j, link in enumerate(chain.links):
        f = frames[j]
        rel = f.joint_position - origin_p
        acc_joint = acc_origin_p + cross3(alpha_p, rel) + cross3(omega_p, cross3(omega_p, rel))
        z = f.joint_axis
        qd = chain.qd[j]
        if link.joint_type == "revolute":
            omega = omega_p + qd * z
            alpha = alpha_p + qd * cross3(omega_p, z)
            acc_origin = acc_joint
        else:
            omega = omega_p
            alpha = alpha_p
            acc_origin = (
                acc_joint
                + 2.0 * qd * cross3(omega_p, z)
                + chain.q[j] * (cross3(alpha_p, z) + cross3(omega_p, cross3(omega_p, z)))
            )
        rel_com = f.com - f.origin
        acc_com = acc_origin + cross3(alpha, rel_com) + cross3(omega, cross3(omega, rel_com))
        omegas.append(omega)
        alphas.append(alpha)
        com_accs.append(acc_com)
        omega_p, alpha_p = omega, alpha
        origin_p, acc_origin_p = f.origin, acc_origin

    # backward pass: suffix sums of forces and torques about the world origin
    forces = []
    torques0 = []
    for j, link in enumerate(chain.links):
        r = frames[j].rotation
        inertia_world = r @ link.inertia @ r.T
        force = link.mass * com_accs[j]
        torque = inertia_world @ alphas[j] + cross3(omegas[j], inertia_world @ omegas[j])
        forces.append(force)
        torques0.append(torque + cross3(frames[j].com, force))
    bias = np.zeros(n)
    f_sub = np.zeros(3)
    t_sub = np.zeros(3)
    for j in range(n - 1, -1, -1):
        f_sub += forces[j]
        t_sub += torques0[j]
        z = frames[j].joint_axis
        if chain.links[j].joint_type == "revolute":
            bias[j] = z @ (t_sub - cross3(frames[j].joint_position, f_sub))
        else:
            bias[j] = z @ f_sub
    return bias


def chain_forward_dynamics(chain: MultibodyChain, gravity: np.ndarray, frames=None) -> np.ndarray:
    frames = frames or chain.forward_kinematics()
    m = chain_mass_matrix(chain, frames)
    bias = chain_bias(chain, gravity, frames)
    try:
        return np.linalg.solve(m, chain.applied_forces - bias)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"chain '{chain.name}': singular mass matrix") from exc


def forward_dynamics(state: SystemState, gravity: np.ndarray) -> Accelerations:
    gravity = np.asarray(gravity, dtype=float)
    lin, ang, qdd = [], [], []
    for body in state.bodies:
        if body.is_static:
            lin.append(np.zeros(3))
            ang.append(np.zeros(3))
            continue
        lin.append(gravity + body.external_force / body.mass)
        inertia_world = body.world_inertia()
        gyro = cross3(body.angular_velocity, inertia_world @ body.angular_velocity)
        ang.append(np.linalg.solve(inertia_world, body.external_torque - gyro))
    for chain in state.chains:
        qdd.append(chain_forward_dynamics(chain, gravity))
    return Accelerations(lin, ang, qdd)


def advance_positions_in_place(state: SystemState, h: float) -> None:
    from .polytope import Pose

    state.time = state.time + h
    for body in state.bodies:
        if body.is_static:
            continue
        body.pose = Pose.trusted(
            body.pose.position + h * body.linear_velocity,
            quaternions.integrate(body.pose.orientation, body.angular_velocity, h),
        )
    for chain in state.chains:
        chain.q = chain.q + h * chain.qd


def advance_velocities_in_place(state: SystemState, h: float, gravity: np.ndarray) -> None:
    acc = forward_dynamics(state, gravity)
    for body, a, alpha in zip(state.bodies, acc.body_linear, acc.body_angular):
        if body.is_static:
            continue
        body.linear_velocity = body.linear_velocity + h * a
        body.angular_velocity = body.angular_velocity + h * alpha
    for chain, qdd in zip(state.chains, acc.chain_qdd):
        chain.qd = chain.qd + h * qdd


def integrate_position(state: SystemState, h: float) -> SystemState:
    """Advance poses and joint coordinates by h times the current velocities."""
    if h < 0.0:
        raise ValueError("step must be nonnegative")
    out = state.copy()
    advance_positions_in_place(out, h)
    return out


def integrate_velocity(state: SystemState, h: float, gravity: np.ndarray) -> SystemState:
    """Advance velocities by h times the accelerations at the current positions."""
    if h < 0.0:
        raise ValueError("step must be nonnegative")
    out = state.copy()
    advance_velocities_in_place(out, h, gravity)
    return out


def point_velocity(state: SystemState, ref: CollidableRef, point: np.ndarray) -> np.ndarray:
    """World velocity of a world point rigidly attached to a body or link."""
    if ref.kind == "body":
        body = state.bodies[ref.index]
        if body.is_static:
            return np.zeros(3)
        return point_velocity_rigid(body.linear_velocity, body.angular_velocity, body.pose.position, point)
    chain = state.chains[ref.index]
    frames = chain.forward_kinematics()
    twist = chain.link_twist(ref.link, frames)
    return point_velocity_rigid(twist.linear, twist.angular, twist.center, point)


def kinetic_energy(state: SystemState) -> float:
    total = 0.0
    for body in state.bodies:
        if body.is_static:
            continue
        total += 0.5 * body.mass * float(body.linear_velocity @ body.linear_velocity)
        total += 0.5 * float(body.angular_velocity @ body.world_inertia() @ body.angular_velocity)
    for chain in state.chains:
        m = chain_mass_matrix(chain)
        total += 0.5 * float(chain.qd @ m @ chain.qd)
    return total


def mechanical_energy(state: SystemState, gravity: np.ndarray) -> float:
    gravity = np.asarray(gravity, dtype=float)
    total = kinetic_energy(state)
    for body in state.bodies:
        total += -body.mass * float(gravity @ body.pose.position)
    for chain in state.chains:
        frames = chain.forward_kinematics()
        for link, f in zip(chain.links, frames):
            total += -link.mass * float(gravity @ f.com)
    return total

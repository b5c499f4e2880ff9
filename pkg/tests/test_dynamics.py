import numpy as np
import pytest

from polysim import dynamics, quaternions
from polysim.bodies import ChainLink, CollidableRef, ModelError, MultibodyChain, RigidBody, SystemState
from polysim.polytope import Pose, box, uniform_density_mass_properties

from conftest import lagrangian_chain_oracle

GRAVITY = np.array([0.0, 0.0, -9.8])
CUBE = box([0.5, 0.5, 0.5])
_, _, CUBE_INERTIA = uniform_density_mass_properties(CUBE, 1.0)


def free_body(name="b", pose=None, vel=(0, 0, 0), omega=(0, 0, 0), static=False, mass=1.0):
    return RigidBody(
        name, CUBE, mass, CUBE_INERTIA if not static else np.eye(3),
        pose or Pose.identity(), np.array(vel, dtype=float), np.array(omega, dtype=float),
        is_static=static,
    )


def thin_link(joint="revolute", axis=(0, 1, 0), location=(0, 0, 0), com_offset=(0.5, 0, 0), mass=1.0):
    poly = box([0.5, 0.02, 0.02])
    _, _, inertia = uniform_density_mass_properties(poly, mass)
    return ChainLink(joint, np.array(axis, float), np.array(location, float), np.array(com_offset, float), poly, mass, inertia)


def pendulum_chain(length=1.0, mass=1.0, inertia_scale=1.0):
    # joint at the base, axis y, COM hanging距离 length below at q = 0
    poly = box([0.02, 0.02, length / 2])
    _, _, inertia = uniform_density_mass_properties(poly, mass)
    link = ChainLink("revolute", [0, 1, 0], [0, 0, 0], [0, 0, -length], poly, mass, inertia * inertia_scale)
    return MultibodyChain("pend", Pose.identity(), [link], [0.0], [0.0])


def test_ballistic_free_body():
    state = SystemState(bodies=[free_body(omega=(0.0, 0.0, 0.0))])
    acc = dynamics.forward_dynamics(state, GRAVITY)
    assert np.allclose(acc.body_linear[0], GRAVITY, atol=1e-14)
    assert np.allclose(acc.body_angular[0], 0.0, atol=1e-14)


def test_gyroscopic_term():
    # tumbling asymmetric box: alpha = I_w^{-1} (-omega x I_w omega)
    body = RigidBody("t", box([0.5, 0.3, 0.2]), 2.0,
                     uniform_density_mass_properties(box([0.5, 0.3, 0.2]), 2.0)[2],
                     Pose.identity(), np.zeros(3), np.array([1.0, 2.0, 3.0]))
    state = SystemState(bodies=[body])
    acc = dynamics.forward_dynamics(state, GRAVITY)
    iw = body.world_inertia()
    expected = np.linalg.solve(iw, -np.cross(body.angular_velocity, iw @ body.angular_velocity))
    assert np.allclose(acc.body_angular[0], expected, atol=1e-12)


def test_static_body_zero_acceleration():
    state = SystemState(bodies=[free_body(static=True)])
    acc = dynamics.forward_dynamics(state, GRAVITY)
    assert np.allclose(acc.body_linear[0], 0.0)
    assert np.allclose(acc.body_angular[0], 0.0)


def test_pendulum_closed_form():
    length, mass = 1.0, 1.0
    chain = pendulum_chain(length, mass)
    link = chain.links[0]
    i_y = link.inertia[1, 1]
    for theta in (0.3, np.pi / 2, -1.2):
        chain.q = np.array([theta])
        chain.qd = np.array([0.0])
        qdd = dynamics.chain_forward_dynamics(chain, GRAVITY)
        expected = -mass * 9.8 * length * np.sin(theta) / (i_y + mass * length ** 2)
        assert qdd[0] == pytest.approx(expected, rel=1e-12)
    # near point mass limit: matches -(g/l) sin(theta)
    chain = pendulum_chain(length, mass, inertia_scale=1e-9)
    chain.q = np.array([0.7])
    qdd = dynamics.chain_forward_dynamics(chain, GRAVITY)
    assert qdd[0] == pytest.approx(-(9.8 / length) * np.sin(0.7), rel=1e-6)


def test_chain_matches_lagrangian_oracle():
    # mixed revolute/prismatic spatial 3-link chain against the symbolic EOM
    specs = [
        dict(joint="revolute", axis=(0, 0, 1), location=(0, 0, 0), com_offset=(0.4, 0, 0),
             mass=1.3, inertia=None),
        dict(joint="revolute", axis=(0, 1, 0), location=(0.8, 0, 0), com_offset=(0.3, 0, 0.1),
             mass=0.7, inertia=None),
        dict(joint="prismatic", axis=(1, 0, 0), location=(0.6, 0, 0.2), com_offset=(0.2, 0, 0),
             mass=0.5, inertia=None),
    ]
    links = []
    for s in specs:
        poly = box([0.3, 0.05, 0.05])
        _, _, inertia = uniform_density_mass_properties(poly, s["mass"])
        s["inertia"] = inertia
        links.append(ChainLink(s["joint"], s["axis"], s["location"], s["com_offset"], poly, s["mass"], inertia))
    oracle = lagrangian_chain_oracle(specs, GRAVITY)

    rng = np.random.default_rng(17)
    for _ in range(100):
        q = rng.uniform(-2.0, 2.0, size=3)
        qd = rng.uniform(-3.0, 3.0, size=3)
        u = rng.uniform(-5.0, 5.0, size=3)
        chain = MultibodyChain("c", Pose.identity(), links, q, qd, u)
        got = dynamics.chain_forward_dynamics(chain, GRAVITY)
        want = oracle(q, qd, u)
        scale = max(1.0, np.abs(want).max())
        assert np.abs(got - want).max() / scale < 1e-8


def test_integrate_position_examples():
    state = SystemState(bodies=[free_body(vel=(1.0, 0.0, 0.0))])
    same = dynamics.integrate_position(state, 0.0)
    assert np.allclose(same.bodies[0].pose.position, 0.0)
    moved = dynamics.integrate_position(state, 0.5)
    assert np.allclose(moved.bodies[0].pose.position, [0.5, 0.0, 0.0])
    # velocities unchanged, original untouched
    assert np.allclose(moved.bodies[0].linear_velocity, [1.0, 0.0, 0.0])
    assert np.allclose(state.bodies[0].pose.position, 0.0)


def test_integrate_position_quaternion_norm_preserved():
    rng = np.random.default_rng(4)
    state = SystemState(bodies=[free_body(omega=tuple(rng.normal(size=3) * 5))])
    for _ in range(100):
        state = dynamics.integrate_position(state, 0.01)
        assert abs(np.linalg.norm(state.bodies[0].pose.orientation) - 1.0) < 1e-10


def test_integrate_velocity_examples():
    state = SystemState(bodies=[free_body()])
    out = dynamics.integrate_velocity(state, 0.1, GRAVITY)
    assert out.bodies[0].linear_velocity[2] == pytest.approx(-0.98, abs=1e-12)
    unchanged = dynamics.integrate_velocity(state, 0.0, GRAVITY)
    assert np.allclose(unchanged.bodies[0].linear_velocity, 0.0)
    # pendulum at theta = pi/2 with l = 1: qd drops by h * g / l in the point-mass limit
    chain = pendulum_chain(1.0, 1.0, inertia_scale=1e-9)
    chain.q = np.array([np.pi / 2])
    state = SystemState(chains=[chain])
    out = dynamics.integrate_velocity(state, 0.01, GRAVITY)
    assert out.chains[0].qd[0] == pytest.approx(-0.098, rel=1e-6)


def test_point_velocity_cases():
    state = SystemState(bodies=[free_body(vel=(1, 0, 0))])
    ref = CollidableRef("body", 0)
    assert np.allclose(dynamics.point_velocity(state, ref, np.array([3.0, 2.0, 1.0])), [1, 0, 0])
    state = SystemState(bodies=[free_body(omega=(0, 0, 1))])
    v = dynamics.point_velocity(state, ref, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(v, [0.0, 1.0, 0.0], atol=1e-14)
    state = SystemState(bodies=[free_body(static=True)])
    assert np.allclose(dynamics.point_velocity(state, ref, np.array([1.0, 1.0, 1.0])), 0.0)


def test_point_velocity_matches_finite_difference():
    rng = np.random.default_rng(12)
    body = free_body(vel=tuple(rng.normal(size=3)), omega=tuple(rng.normal(size=3)))
    chain = MultibodyChain("c", Pose.identity(), [thin_link(), thin_link(location=(1, 0, 0))],
                           rng.normal(size=2), rng.normal(size=2))
    state = SystemState(bodies=[body], chains=[chain])
    for ref, local in [
        (CollidableRef("body", 0), np.array([0.2, -0.3, 0.4])),
        (CollidableRef("link", 0, 1), np.array([0.1, 0.0, 0.0])),
    ]:
        colls = {str(c.ref): c for c in state.collidables()}
        c = colls[str(ref)]
        world = c.pose.transform(local[None])[0]
        analytic = dynamics.point_velocity(state, ref, world)
        errs = []
        for h in (1e-4, 5e-5):
            moved = dynamics.integrate_position(state, h)
            c2 = {str(cc.ref): cc for cc in moved.collidables()}[str(ref)]
            world2 = c2.pose.transform(local[None])[0]
            errs.append(np.linalg.norm((world2 - world) / h - analytic))
        # first-order convergence of the finite difference
        assert errs[1] < errs[0]
        assert errs[0] < 1e-3


def test_joint_world_locations():
    chain = MultibodyChain("c", Pose.identity([1.0, 2.0, 3.0]),
                           [thin_link(axis=(0, 0, 1)), thin_link(axis=(0, 0, 1), location=(1, 0, 0))],
                           [0.0, 0.0], [0.0, 0.0])
    locs = chain.joint_world_locations()
    assert np.allclose(locs[0], [1, 2, 3])
    assert np.allclose(locs[1], [2, 2, 3])
    chain.q = np.array([np.pi / 2, 0.0])
    locs = chain.joint_world_locations()
    assert np.allclose(locs[1], [1, 3, 3], atol=1e-12)
    empty = MultibodyChain("e", Pose.identity([5, 0, 0]), [], [], [])
    assert np.allclose(empty.joint_world_locations(), [[5, 0, 0]])


def test_mechanical_energy_cases():
    state = SystemState(bodies=[free_body(static=True, pose=Pose.identity([0, 0, 2.0]))])
    # static body contributes only potential (mass field unused for statics -> zero)
    e_static = dynamics.mechanical_energy(state, GRAVITY)
    state2 = SystemState(bodies=[free_body(vel=(1, 0, 0))])
    assert dynamics.mechanical_energy(state2, GRAVITY) == pytest.approx(0.5, abs=1e-12)
    assert dynamics.kinetic_energy(state2) == pytest.approx(0.5, abs=1e-12)
    assert e_static == pytest.approx(2.0 * 9.8, abs=1e-9)


def test_ballistic_energy_drift_first_order():
    def drift(h):
        body = free_body(vel=(1.0, 0.0, 2.0), omega=(3.0, 2.0, 1.0), pose=Pose.identity([0, 0, 10]))
        body = RigidBody("t", box([0.5, 0.3, 0.2]), 1.0,
                         uniform_density_mass_properties(box([0.5, 0.3, 0.2]), 1.0)[2],
                         Pose.identity([0, 0, 10]), np.array([1.0, 0, 2.0]), np.array([3.0, 2.0, 1.0]))
        state = SystemState(bodies=[body])
        e0 = dynamics.mechanical_energy(state, GRAVITY)
        steps = int(round(1.0 / h))
        for _ in range(steps):
            state = dynamics.integrate_position(state, h)
            state = dynamics.integrate_velocity(state, h, GRAVITY)
        return abs(dynamics.mechanical_energy(state, GRAVITY) - e0)

    d1 = drift(1e-3)
    d2 = drift(5e-4)
    assert 1.5 <= d1 / d2 <= 3.0


def test_pendulum_energy_conserved_within_integrator_error():
    from scipy.integrate import solve_ivp

    chain = pendulum_chain(1.0, 1.0)
    chain.q = np.array([1.0])
    state = SystemState(chains=[chain])
    e0 = dynamics.mechanical_energy(state, GRAVITY)
    h = 1e-4
    for _ in range(2000):
        state = dynamics.integrate_position(state, h)
        state = dynamics.integrate_velocity(state, h, GRAVITY)
    # reference trajectory from a tight-tolerance integrator
    link = chain.links[0]
    i_eff = link.inertia[1, 1] + 1.0
    sol = solve_ivp(lambda t, y: [y[1], -9.8 * np.sin(y[0]) / i_eff], (0, 0.2), [1.0, 0.0],
                    rtol=1e-12, atol=1e-12)
    assert state.chains[0].q[0] == pytest.approx(sol.y[0, -1], abs=5e-4)
    drift = abs(dynamics.mechanical_energy(state, GRAVITY) - e0)
    assert drift < 5e-3


def test_fixed_base_required_for_dynamics():
    chain = MultibodyChain("c", Pose.identity(), [thin_link()], [0.0], [0.0], base_fixed=False)
    with pytest.raises(ModelError):
        dynamics.chain_forward_dynamics(chain, GRAVITY)


def test_model_validation_errors():
    with pytest.raises(ModelError):
        free_body(mass=0.0)
    with pytest.raises(ModelError):
        RigidBody("bad", CUBE, 1.0, -np.eye(3), Pose.identity())
    with pytest.raises(ModelError):
        RigidBody("s", CUBE, 1.0, np.eye(3), Pose.identity(), np.array([1.0, 0, 0]), np.zeros(3), is_static=True)

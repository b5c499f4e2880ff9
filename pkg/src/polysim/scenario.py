"""Scenario files: world configuration, bodies, and chains in YAML.

The grammar is documented in the README.  Shapes are explicit vertex lists or
primitives (box half-extents, regular solids); `inertia: auto` computes
uniform-density mass properties and recenters the geometry on its center of
mass (the body frame origin).  `random` initial fields are resolved from the
world seed in document order, so a seed pins the whole initial state.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import yaml

from . import quaternions
from .bodies import ChainLink, MultibodyChain, RigidBody, SystemState, ModelError
from .config import SimConfig
from .polytope import GeometryError, Pose, box, build_polytope, regular_solid, uniform_density_mass_properties

WORLD_CONFIG_KEYS = {
    "gravity": "gravity",
    "end_time": "end_time",
    "max_step": "max_step",
    "min_step": "min_step",
    "touch_tolerance": "touch_tolerance",
    "rest_velocity_tolerance": "rest_velocity_tol",
    "gap_error_tolerance": "gap_error_tol",
    "penetration_tolerance": "penetration_tolerance",
    "quiescence_speed": "quiescence_speed",
    "quiescence_steps": "quiescence_steps",
    "seed": "seed",
}


class ScenarioError(ValueError):
    """Scenario rejected; the message names the offending field."""


def _vector(value, length, field):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{field}: expected {length} numbers") from exc
    if arr.shape != (length,):
        raise ScenarioError(f"{field}: expected {length} numbers, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ScenarioError(f"{field}: entries must be finite")
    return arr


def _shape(spec, field):
    if not isinstance(spec, dict):
        raise ScenarioError(f"{field}: shape must be a mapping")
    if "box" in spec:
        return box(_vector(spec["box"], 3, f"{field}.box"))
    if "vertices" in spec:
        verts = np.asarray(spec["vertices"], dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ScenarioError(f"{field}.vertices: expected a list of 3-vectors")
        try:
            return build_polytope(verts)
        except GeometryError as exc:
            raise ScenarioError(f"{field}.vertices: {exc}") from exc
    if "regular" in spec:
        kind = spec["regular"]
        radius = float(spec.get("radius", 1.0))
        try:
            return regular_solid(kind, radius)
        except GeometryError as exc:
            raise ScenarioError(f"{field}.regular: {exc}") from exc
    raise ScenarioError(f"{field}: shape needs one of box / vertices / regular")


def _orientation(value, rng, field):
    if value == "random":
        if rng is None:
            raise ScenarioError(f"{field}: random requires a world seed")
        return quaternions.normalize(rng.normal(size=4))
    q = _vector(value, 4, field)
    n = np.linalg.norm(q)
    if abs(n - 1.0) > 1e-6:
        raise ScenarioError(f"{field}: quaternion norm {n:.6f} is not 1")
    return q / n


def _velocity(value, rng, scale, field):
    if value == "random":
        if rng is None:
            raise ScenarioError(f"{field}: random requires a world seed")
        return rng.normal(size=3) * scale
    return _vector(value, 3, field)


def _resolve_inertia(spec, poly, mass, field):
    """Returns (polytope, inertia, com_shift).  Auto inertia recenters on the COM."""
    if spec == "auto" or spec is None:
        _, com, inertia = uniform_density_mass_properties(poly, mass)
        if np.linalg.norm(com) > 1e-12:
            poly = build_polytope(poly.vertices - com)
        return poly, inertia, com
    inertia = np.asarray(spec, dtype=float)
    if inertia.shape != (3, 3):
        raise ScenarioError(f"{field}: inertia must be 'auto' or a 3x3 matrix")
    return poly, inertia, np.zeros(3)


def load_scenario(text: str, seed: int | None = None) -> tuple[SystemState, SimConfig]:
    """Parse and validate a scenario document; returns the initial state and config.

    A `seed` argument overrides the world seed before random fields resolve.
    """
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark else ""
        raise ScenarioError(f"parse error{where}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")

    world = doc.get("world", {}) or {}
    cfg_kwargs = {}
    for key, attr in WORLD_CONFIG_KEYS.items():
        if key in world:
            value = world[key]
            if key == "gravity":
                value = _vector(value, 3, "world.gravity")
            cfg_kwargs[attr] = value
    unknown = set(world) - set(WORLD_CONFIG_KEYS)
    if unknown:
        raise ScenarioError(f"world: unknown keys {sorted(unknown)}")
    if seed is not None:
        cfg_kwargs["seed"] = int(seed)
    try:
        cfg = SimConfig(**cfg_kwargs)
    except ValueError as exc:
        raise ScenarioError(f"world: {exc}") from exc
    rng = np.random.default_rng(cfg.seed)

    state = SystemState()
    names = set()
    for i, body_spec in enumerate(doc.get("bodies", []) or []):
        field = f"bodies[{i}]"
        if not isinstance(body_spec, dict):
            raise ScenarioError(f"{field}: expected a mapping")
        name = body_spec.get("name")
        if not name:
            raise ScenarioError(f"{field}.name: required")
        if name in names:
            raise ScenarioError(f"{field}.name: duplicate name '{name}'")
        names.add(name)
        static = bool(body_spec.get("static", False))
        poly = _shape(body_spec.get("shape"), f"{field}.shape")
        mass = float(body_spec.get("mass", 0.0 if static else -1.0))
        if not static and mass <= 0.0:
            raise ScenarioError(f"{field}.mass: dynamic body needs positive mass")
        if static:
            inertia = np.eye(3)
            mass = max(mass, 1.0)
            com_shift = np.zeros(3)
        else:
            poly, inertia, com_shift = _resolve_inertia(body_spec.get("inertia", "auto"), poly, mass, f"{field}.inertia")
        limits = body_spec.get("random_limits", {}) or {}
        orientation = _orientation(body_spec.get("orientation", [1, 0, 0, 0]), rng, f"{field}.orientation")
        position = _vector(body_spec.get("position", [0, 0, 0]), 3, f"{field}.position")
        jitter = limits.get("position_jitter")
        if jitter is not None:
            position = position + rng.uniform(-1.0, 1.0, size=3) * _vector(jitter, 3, f"{field}.random_limits.position_jitter")
        velocity = _velocity(body_spec.get("velocity", [0, 0, 0]), rng, float(limits.get("speed", 1.0)), f"{field}.velocity")
        angular = _velocity(body_spec.get("angular_velocity", [0, 0, 0]), rng, float(limits.get("spin", 1.0)), f"{field}.angular_velocity")
        if static:
            velocity = np.zeros(3)
            angular = np.zeros(3)
        rot = quaternions.to_matrix(orientation)
        pose = Pose(position + rot @ com_shift, orientation)
        try:
            state.bodies.append(RigidBody(name, poly, mass, inertia, pose, velocity, angular, is_static=static))
        except ModelError as exc:
            raise ScenarioError(f"{field}: {exc}") from exc

    for i, chain_spec in enumerate(doc.get("chains", []) or []):
        field = f"chains[{i}]"
        if not isinstance(chain_spec, dict):
            raise ScenarioError(f"{field}: expected a mapping")
        name = chain_spec.get("name")
        if not name:
            raise ScenarioError(f"{field}.name: required")
        if name in names:
            raise ScenarioError(f"{field}.name: duplicate name '{name}'")
        names.add(name)
        base_pose = Pose(
            _vector(chain_spec.get("base_position", [0, 0, 0]), 3, f"{field}.base_position"),
            _orientation(chain_spec.get("base_orientation", [1, 0, 0, 0]), rng, f"{field}.base_orientation"),
        )
        links: list[ChainLink] = []
        q_vals: list[float] = []
        qd_vals: list[float] = []
        u_vals: list[float] = []
        for j, link_spec in enumerate(chain_spec.get("links", []) or []):
            lf = f"{field}.links[{j}]"
            if not isinstance(link_spec, dict):
                raise ScenarioError(f"{lf}: expected a mapping")
            count = int(link_spec.get("repeat", 1))
            if count < 1:
                raise ScenarioError(f"{lf}.repeat: must be >= 1")
            for _ in range(count):
                poly = _shape(link_spec.get("shape"), f"{lf}.shape")
                mass = float(link_spec.get("mass", -1.0))
                if mass <= 0.0:
                    raise ScenarioError(f"{lf}.mass: links need positive mass")
                poly, inertia, com_shift = _resolve_inertia(link_spec.get("inertia", "auto"), poly, mass, f"{lf}.inertia")
                com_offset = _vector(link_spec.get("com_offset", [0, 0, 0]), 3, f"{lf}.com_offset") + com_shift
                try:
                    links.append(ChainLink(
                        link_spec.get("joint", "revolute"),
                        _vector(link_spec.get("axis", [0, 0, 1]), 3, f"{lf}.axis"),
                        _vector(link_spec.get("location", [0, 0, 0]), 3, f"{lf}.location"),
                        com_offset, poly, mass, inertia,
                    ))
                except ModelError as exc:
                    raise ScenarioError(f"{lf}: {exc}") from exc
                q_vals.append(float(link_spec.get("q", 0.0)))
                qd_vals.append(float(link_spec.get("qd", 0.0)))
                u_vals.append(float(link_spec.get("force", 0.0)))
        try:
            state.chains.append(MultibodyChain(
                name, base_pose, links, q_vals, qd_vals, u_vals,
                base_fixed=bool(chain_spec.get("fixed", True)),
                self_collision=bool(chain_spec.get("self_collision", True)),
            ))
        except ModelError as exc:
            raise ScenarioError(f"{field}: {exc}") from exc

    return state, cfg


def emit_scenario(state: SystemState, cfg: SimConfig) -> str:
    """Canonical scenario document reproducing the state exactly on reload.

    All randomness is resolved, shapes become explicit vertex lists, and
    inertia tensors are explicit, so loading the output rebuilds the same
    initial state bit for bit (floats round-trip through repr).
    """
    doc: dict = {
        "world": {
            "gravity": [float(g) for g in cfg.gravity],
            "end_time": float(cfg.end_time),
            "max_step": float(cfg.max_step),
            "min_step": float(cfg.min_step),
            "touch_tolerance": float(cfg.touch_tolerance),
            "rest_velocity_tolerance": float(cfg.rest_velocity_tol),
            "gap_error_tolerance": float(cfg.gap_error_tol),
            "penetration_tolerance": float(cfg.penetration_tolerance),
            "quiescence_speed": float(cfg.quiescence_speed),
            "quiescence_steps": int(cfg.quiescence_steps),
            "seed": int(cfg.seed),
        },
    }
    bodies = []
    for b in state.bodies:
        entry = {
            "name": b.name,
            "shape": {"vertices": [[float(x) for x in v] for v in b.polytope.vertices]},
            "mass": float(b.mass),
            "position": [float(x) for x in b.pose.position],
            "orientation": [float(x) for x in b.pose.orientation],
            "static": bool(b.is_static),
        }
        if not b.is_static:
            entry["inertia"] = [[float(x) for x in row] for row in b.inertia]
            entry["velocity"] = [float(x) for x in b.linear_velocity]
            entry["angular_velocity"] = [float(x) for x in b.angular_velocity]
        bodies.append(entry)
    if bodies:
        doc["bodies"] = bodies
    chains = []
    for c in state.chains:
        links = []
        for j, link in enumerate(c.links):
            links.append({
                "joint": link.joint_type,
                "axis": [float(x) for x in link.joint_axis],
                "location": [float(x) for x in link.joint_location],
                "com_offset": [float(x) for x in link.com_offset],
                "shape": {"vertices": [[float(x) for x in v] for v in link.polytope.vertices]},
                "mass": float(link.mass),
                "inertia": [[float(x) for x in row] for row in link.inertia],
                "q": float(c.q[j]),
                "qd": float(c.qd[j]),
                "force": float(c.applied_forces[j]),
            })
        chains.append({
            "name": c.name,
            "base_position": [float(x) for x in c.base_pose.position],
            "base_orientation": [float(x) for x in c.base_pose.orientation],
            "fixed": bool(c.base_fixed),
            "self_collision": bool(c.self_collision),
            "links": links,
        })
    if chains:
        doc["chains"] = chains
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def bundled_scenario_names() -> list[str]:
    from importlib import resources

    names = []
    for item in (resources.files("polysim") / "scenarios").iterdir():
        if item.name.endswith(".yaml"):
            names.append(item.name[:-5])
    return sorted(names)


def load_bundled_scenario(name: str) -> str:
    from importlib import resources

    path = resources.files("polysim") / "scenarios" / f"{name}.yaml"
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario named '{name}'")
    return path.read_text()

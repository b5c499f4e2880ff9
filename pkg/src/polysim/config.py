"""Simulation tolerances and run parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SimConfig:
    max_step: float = 0.01  # step budget handed to the safe-step controller
    min_step: float = 1e-9  # forced floor for transient contact
    # contact hand-off layer: must exceed the per-step gap drift budget by a
    # comfortable factor, or held pairs get ejected from the layer and
    # conservative advancement grinds its way back nanometers at a time
    touch_tolerance: float = 1e-6
    rest_velocity_tol: float = 1e-9  # gap rates below this count as zero
    gap_error_tol: float = 1e-8  # per-step error budget on held contact gaps
    penetration_tolerance: float = 1e-7  # rounding allowance on signed distance
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.8]))
    end_time: float = 10.0
    seed: int = 0
    quiescence_speed: float = 1e-6
    quiescence_steps: int = 100

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float)
        for name in ("max_step", "min_step", "touch_tolerance", "rest_velocity_tol",
                     "gap_error_tol", "penetration_tolerance"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_step <= self.min_step:
            raise ValueError("max_step must exceed min_step")

"""System and perturbation interfaces shared by the case studies.

A :class:`System` is the nominal plant ``x+ = f(x, u, v)``, ``y = g(x, w)``
written for batches: ``x`` has shape ``(batch, state_dim)``. All randomness
enters through explicit draws (initial state, process noise ``v``,
measurement noise ``w``), so stepping is deterministic given the draws.

A :class:`Perturbation` turns the nominal plant into a perturbed one by adding
extra terms. Its own randomness comes from a separate stream, so a nominal and
a perturbed run of the same trial share every nominal draw.
"""
from __future__ import annotations

import dataclasses
from typing import Dict, Tuple

import numpy as np


class System:
    state_dim: int
    obs_dim: int
    control_dim: int
    dt: float

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def process_noise(self, rng: np.random.Generator, steps: int) -> np.ndarray:
        """Process disturbances for ``steps`` transitions, shape ``(steps, k)``."""
        return np.zeros((steps, 0))

    def measurement_noise(self, rng: np.random.Generator, steps: int) -> np.ndarray:
        """Measurement disturbances for ``steps`` observations, shape ``(steps, k)``."""
        return np.zeros((steps, 0))

    def step(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def observe(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def settle(self, x: np.ndarray, x_next: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Resolve terminal events on the transition ``x -> x_next``.

        Returns the (possibly corrected) next states and a mask of trials that
        terminate; terminated trials stay frozen for the rest of the horizon.
        """
        return x_next, np.zeros(x.shape[0], dtype=bool)


class Perturbation:
    """No-op perturbation; subclasses override the hooks they need."""

    name = "none"

    def setup(self, system: System, rng: np.random.Generator, steps: int) -> Dict[str, np.ndarray]:
        """Per-trial draws; arrays are stacked over the batch by the engine."""
        return {}

    def initial(self, x0: np.ndarray, ctx: dict) -> np.ndarray:
        return x0

    def process(self, v: np.ndarray, ctx: dict, t: int) -> np.ndarray:
        return v

    def measurement(self, w: np.ndarray, ctx: dict, t: int) -> np.ndarray:
        return w

    def observe(self, system: System, y: np.ndarray, x: np.ndarray, ctx: dict, t: int) -> np.ndarray:
        return y

    def step(self, system: System, x_next: np.ndarray, x: np.ndarray, u: np.ndarray,
             ctx: dict, t: int) -> np.ndarray:
        return x_next


NO_PERTURBATION = Perturbation()


class ObservationOffset(Perturbation):
    """Adds a constant offset to every observation."""

    name = "observation_offset"

    def __init__(self, offset):
        self.offset = np.asarray(offset, dtype=float)

    def observe(self, system, y, x, ctx, t):
        return y + self.offset


class InitialOffset(Perturbation):
    """Shifts the initial state by a constant vector."""

    name = "initial_offset"

    def __init__(self, offset):
        self.offset = np.asarray(offset, dtype=float)

    def initial(self, x0, ctx):
        return x0 + self.offset


class ProcessNoiseScale(Perturbation):
    """Multiplies the process disturbance by a constant factor."""

    name = "process_noise_scale"

    def __init__(self, scale: float):
        self.scale = float(scale)

    def process(self, v, ctx, t):
        return v * self.scale


class ResampleDisturbances(Perturbation):
    """Replaces process and measurement disturbances by independent draws from
    the same distributions. Both runs keep the initial state."""

    name = "resample_disturbances"

    def setup(self, system, rng, steps):
        return {
            "v": system.process_noise(rng, steps),
            "w": system.measurement_noise(rng, steps + 1),
        }

    def process(self, v, ctx, t):
        return ctx["v"][:, t]

    def measurement(self, w, ctx, t):
        return ctx["w"][:, t]


@dataclasses.dataclass(frozen=True)
class SystemModel:
    """A plant plus the perturbation applied to it (``NO_PERTURBATION`` for the nominal)."""

    system: System
    perturbation: Perturbation = NO_PERTURBATION
    name: str = "nominal"

    @property
    def state_dim(self) -> int:
        return self.system.state_dim

    @property
    def obs_dim(self) -> int:
        return self.system.obs_dim

"""Pipeline-tracking underwater vehicle.

State ``[x, y, theta, v, depth]``. Heading, speed and depth follow their
commands through first-order lags, discretised exactly; the position moves
kinematically. The pipeline is the line ``y = 0`` and a side-scan sonar
returns the in-plane distance ``|y|`` and the heading, both with Gaussian
noise. This first-order surrogate stands in for an identified vehicle model.
"""
from __future__ import annotations

import dataclasses
from typing import Optional, Tuple

import numpy as np

from ..stl.formula import And, Eventually, Formula, Globally, Interval, Not, Or, Pred
from ..stl.predicates import Functional, PredicateAtom
from .models import Perturbation, System

TIME_CONSTANTS = (1.5, 2.0, 3.0)  # heading, speed, depth (seconds)


def uuv_step(state, commands, dt: float = 0.5, taus: Tuple[float, float, float] = TIME_CONSTANTS) -> np.ndarray:
    """Advance ``[x, y, theta, v, depth]`` by ``dt`` under ``(heading, speed, depth)`` commands.

    The lagged channels use the exact response ``s + (c - s)(1 - exp(-dt / tau))``;
    position uses the heading and speed at the start of the step.
    """
    s = np.asarray(state, dtype=float)
    c = np.asarray(commands, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ValueError("commands must be finite")
    alpha = 1.0 - np.exp(-dt / np.asarray(taus, dtype=float))
    x, y, th, v, dep = (s[..., i] for i in range(5))
    out = np.stack([
        x + v * np.cos(th) * dt,
        y + v * np.sin(th) * dt,
        th + (c[..., 0] - th) * alpha[..., 0],
        v + (c[..., 1] - v) * alpha[..., 1],
        dep + (c[..., 2] - dep) * alpha[..., 2],
    ], axis=-1)
    return out


def sonar_observe(state, sigma_d: float = 0.5, sigma_theta: float = 0.01,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """``(d, theta)`` with ``d = |y| + N(0, sigma_d)`` and ``theta + N(0, sigma_theta)``."""
    if sigma_d < 0 or sigma_theta < 0:
        raise ValueError("noise levels must be nonnegative")
    s = np.asarray(state, dtype=float)
    obs = np.stack([np.abs(s[..., 1]), s[..., 2]], axis=-1)
    if rng is not None:
        obs = obs + rng.standard_normal(obs.shape) * np.array([sigma_d, sigma_theta])
    return obs


def _lateral(states):
    return np.abs(np.asarray(states)[..., 1])


@dataclasses.dataclass(frozen=True, eq=False)
class UuvPipeline(System):
    dt: float = 0.5
    taus: Tuple[float, float, float] = TIME_CONSTANTS
    sigma_d: float = 0.5
    sigma_theta: float = 0.01
    y0_range: Tuple[float, float] = (5.0, 55.0)
    theta0_halfwidth: float = 0.2
    speed0: float = 1.5
    depth0: float = 45.0
    d_l: float = 10.0
    d_u: float = 50.0

    state_dim = 5
    obs_dim = 2
    control_dim = 3

    def __post_init__(self):
        if self.dt <= 0 or min(self.taus) <= 0:
            raise ValueError("dt and time constants must be positive")

    def initial_state(self, rng):
        u = rng.uniform(size=2)
        lo, hi = self.y0_range
        return np.array([
            0.0, lo + (hi - lo) * u[0], self.theta0_halfwidth * (2 * u[1] - 1), self.speed0, self.depth0,
        ])

    def measurement_noise(self, rng, steps):
        return rng.standard_normal((steps, 2)) * np.array([self.sigma_d, self.sigma_theta])

    def process_noise(self, rng, steps):
        return np.zeros((steps, 0))

    def step(self, x, u, v):
        return uuv_step(x, u, self.dt, self.taus)

    def observe(self, x, w):
        return sonar_observe(x, 0.0, 0.0) + w

    def lower_atom(self) -> PredicateAtom:
        """``d >= d_l`` as the functional ``|y| - d_l``."""
        return PredicateAtom("above_lower", Functional(lambda s: _lateral(s) - self.d_l, dim=5))

    def upper_atom(self) -> PredicateAtom:
        """``d <= d_u`` as the functional ``d_u - |y|``."""
        return PredicateAtom("below_upper", Functional(lambda s: self.d_u - _lateral(s), dim=5))

    def stl_spec(self, t_uuv: float = 10.0) -> Formula:
        """``G(d < d_l -> F[0,t](d >= d_l)) & G(d > d_u -> F[0,t](d <= d_u))`` with ``t`` in seconds."""
        k = int(round(t_uuv / self.dt))
        lo, up = Pred(self.lower_atom()), Pred(self.upper_atom())
        recover_lo = Or(lo, Eventually(Interval(0, k), lo))
        recover_up = Or(up, Eventually(Interval(0, k), up))
        return And(Globally(Interval(0, None), recover_lo), Globally(Interval(0, None), recover_up))


class UuvPhysics(Perturbation):
    """Stand-in for a physics engine: lags slow down with the size of the
    command error and the position picks up Gaussian process noise."""

    name = "uuv_physics"

    def __init__(self, lag_gain: float = 0.2, position_sigma: float = 0.05):
        self.lag_gain = float(lag_gain)
        self.position_sigma = float(position_sigma)

    def setup(self, system, rng, steps):
        return {"v": rng.standard_normal((steps, 2)) * self.position_sigma}

    def step(self, system, x_next, x, u, ctx, t):
        err = np.abs(u - x[:, 2:5])
        alpha = (1.0 - np.exp(-system.dt / np.asarray(system.taus))) / (1.0 + self.lag_gain * err)
        out = x_next.copy()
        out[:, 2:5] = x[:, 2:5] + (u - x[:, 2:5]) * alpha
        out[:, :2] += ctx["v"][:, t]
        return out


class PipelineFollower:
    """Scripted controller steering the sonar distance toward ``standoff`` metres.

    Assumes the vehicle runs on the ``y > 0`` side heading along ``+x``.
    """

    def __init__(self, standoff: float, gain: float = 0.05, max_heading: float = 0.5,
                 speed: float = 1.5, depth: float = 45.0):
        self.standoff = float(standoff)
        self.gain = float(gain)
        self.max_heading = float(max_heading)
        self.speed = float(speed)
        self.depth = float(depth)

    def __call__(self, y):
        heading = np.clip(-self.gain * (y[:, 0] - self.standoff), -self.max_heading, self.max_heading)
        return np.stack([heading, np.full_like(heading, self.speed), np.full_like(heading, self.depth)], axis=1)


def scripted_uuv_controllers() -> dict:
    """Three followers; standoffs nearer the edge of ``[d_l, d_u]`` are riskier."""
    return {
        "standoff_30": PipelineFollower(30.0),
        "standoff_20": PipelineFollower(20.0),
        "standoff_12": PipelineFollower(12.0),
    }

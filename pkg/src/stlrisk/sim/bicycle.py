"""Kinematic bicycle in an L-shaped hallway, observed through a 2-D LiDAR.

State ``[x, y, v, theta]``. The car drives at constant speed (or tracks a
commanded speed through a first-order lag) and steers with a command in
``[-15, 15]`` mapped linearly onto ``[-max_steer, max_steer]``.

The default hallway is a straight 1.5 m wide corridor along +x, closed behind
the start, with a 90 degree right turn into an exit leg running down to
``y = -10``. Walls are line segments ``(x1, y1, x2, y2)``.
"""
from __future__ import annotations

import dataclasses
import json
from typing import FrozenSet, Optional, Tuple

import numpy as np

from ..stl.constraint import ConstraintSpec
from ..stl.predicates import Functional, PredicateAtom
from .models import Perturbation, System

STEER_COMMAND_LIMIT = 15.0


class OutsideMap(ValueError):
    """A LiDAR scan was requested from a pose outside the free space."""

    def __init__(self, rows):
        rows = np.atleast_1d(np.asarray(rows, dtype=int))
        super().__init__(f"{rows.size} pose(s) outside the hallway, first at batch row {rows[0]}")
        self.rows = rows


def default_hallway() -> np.ndarray:
    half = 0.75
    return np.array([
        [0.0, half, 10.0 + half, half],  # outer wall of the straight leg
        [10.0 + half, half, 10.0 + half, -10.0],  # outer wall of the exit leg
        [0.0, -half, 10.0 - half, -half],  # inner wall of the straight leg
        [10.0 - half, -half, 10.0 - half, -10.0],  # inner wall of the exit leg
        [0.0, -half, 0.0, half],  # back wall
    ])


def default_free_space() -> np.ndarray:
    """Polygon of the hallway interior (exit side open), counter-clockwise."""
    half = 0.75
    return np.array([
        [0.0, -half], [10.0 - half, -half], [10.0 - half, -10.0],
        [10.0 + half, -10.0], [10.0 + half, half], [0.0, half],
    ])


def load_map(path) -> np.ndarray:
    """Read a wall list: JSON ``{"walls": [[x1, y1, x2, y2], ...]}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    walls = np.asarray(data["walls"] if isinstance(data, dict) else data, dtype=float)
    if walls.ndim != 2 or walls.shape[1] != 4 or len(walls) == 0:
        raise ValueError("a map is a nonempty list of [x1, y1, x2, y2] segments")
    return walls


def save_map(path, walls) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"walls": np.asarray(walls, dtype=float).tolist()}, fh)


def raycast(origins: np.ndarray, angles: np.ndarray, walls: np.ndarray, max_range: float) -> np.ndarray:
    """Distance along each ray to the nearest wall, clipped to ``max_range``.

    ``origins`` is ``(..., 2)``, ``angles`` is ``(..., rays)`` (world frame).
    A ray ``o + t d`` meets the wall ``p + s e`` where ``t = (q x e) / (d x e)``
    and ``s = (q x d) / (d x e)`` with ``q = p - o``; it counts when ``t >= 0``
    and ``0 <= s <= 1``.
    """
    origins = np.asarray(origins, dtype=float)
    angles = np.asarray(angles, dtype=float)
    # walls on the leading axis keep numpy's inner loops long
    px, py, ex, ey = _wall_columns(walls, origins.ndim)
    dx, dy = np.cos(angles), np.sin(angles)
    qx = px - origins[..., 0, None]
    qy = py - origins[..., 1, None]
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qx * ey - qy * ex) / denom
        s = (qx * dy - qy * dx) / denom
    # parallel walls give non-finite s, which fails the range test below
    t[~((s >= 0) & (s <= 1) & (t >= 0))] = np.inf
    return np.minimum(np.minimum.reduce(t, axis=0), max_range)


def _wall_columns(walls: np.ndarray, ndim: int):
    """Start point and direction of each wall, shaped to broadcast as ``(walls, ...)``."""
    shape = (len(walls),) + (1,) * ndim
    px, py = walls[:, 0], walls[:, 1]
    ex, ey = walls[:, 2] - px, walls[:, 3] - py
    return px.reshape(shape), py.reshape(shape), ex.reshape(shape), ey.reshape(shape)


def raycast_reference(origin, angle: float, walls, max_range: float) -> float:
    """Straight-line loop over the walls for a single ray."""
    best = max_range
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = np.cos(angle), np.sin(angle)
    for x1, y1, x2, y2 in np.asarray(walls, dtype=float):
        ex, ey = x2 - x1, y2 - y1
        denom = dx * ey - dy * ex
        if denom == 0:
            continue
        qx, qy = x1 - ox, y1 - oy
        t = (qx * ey - qy * ex) / denom
        s = (qx * dy - qy * dx) / denom
        if t >= 0 and 0 <= s <= 1 and t < best:
            best = t
    return best


def wall_distance(points: np.ndarray, walls: np.ndarray) -> np.ndarray:
    """Euclidean distance from points ``(..., 2)`` to the nearest wall segment."""
    points = np.asarray(points, dtype=float)
    ax, ay, ex, ey = _wall_columns(walls, points.ndim - 1)
    wx = points[..., 0] - ax
    wy = points[..., 1] - ay
    s = np.clip((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0)
    rx = wx - s * ex
    ry = wy - s * ey
    return np.sqrt(np.minimum.reduce(rx * rx + ry * ry, axis=0))


def inside_polygon(points: np.ndarray, poly: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Even-odd test; points within ``tol`` of the boundary count as inside."""
    points = np.asarray(points, dtype=float)
    x, y = points[..., 0, None], points[..., 1, None]
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(poly[:, 0], -1), np.roll(poly[:, 1], -1)
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    inside = np.sum(straddle & (x < xcross), axis=-1) % 2 == 1
    if not np.all(inside):
        edges = np.column_stack([x1, y1, x2, y2])
        out = ~inside
        inside[out] = wall_distance(points[out], edges) <= tol
    return inside


@dataclasses.dataclass(frozen=True)
class LidarConfig:
    rays: int = 21
    fov: float = np.pi
    max_range: float = 5.0
    noise_halfwidth: float = 0.05
    dropped: FrozenSet[int] = frozenset()

    def __post_init__(self):
        if self.rays < 1:
            raise ValueError("need at least one ray")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        object.__setattr__(self, "dropped", frozenset(int(i) for i in self.dropped))
        if any(not 0 <= i < self.rays for i in self.dropped):
            raise ValueError("dropped ray index out of range")

    @property
    def offsets(self) -> np.ndarray:
        """Ray angles relative to the heading, from rightmost to leftmost."""
        if self.rays == 1:
            return np.zeros(1)
        return np.linspace(-self.fov / 2, self.fov / 2, self.rays)


def steering_angle(command, max_steer: float = np.pi / 6) -> np.ndarray:
    return np.clip(command, -STEER_COMMAND_LIMIT, STEER_COMMAND_LIMIT) / STEER_COMMAND_LIMIT * max_steer


def wrap_angle(theta):
    """Wrap to ``(-pi, pi]``."""
    wrapped = np.mod(theta + np.pi, 2 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def bicycle_step(state, steering, dt: float = 0.1, wheelbase: float = 0.32,
                 speed_command=None, speed_tau: Optional[float] = None) -> np.ndarray:
    """One forward-Euler step of the kinematic bicycle.

    ``steering`` is the front-wheel angle in radians (already clamped). The
    speed stays constant unless both ``speed_command`` and ``speed_tau`` are
    given, in which case it relaxes toward the command with time constant
    ``speed_tau``.
    """
    state = np.asarray(state, dtype=float)
    x, y, v, th = state[..., 0], state[..., 1], state[..., 2], state[..., 3]
    nx = x + v * np.cos(th) * dt
    ny = y + v * np.sin(th) * dt
    nth = wrap_angle(th + v / wheelbase * np.tan(steering) * dt)
    if speed_command is not None and speed_tau is not None:
        nv = v + (speed_command - v) * (dt / speed_tau)
    else:
        nv = v
    return np.stack([nx, ny, np.broadcast_to(nv, nx.shape), nth], axis=-1)


def lidar_scan(state, walls, cfg: LidarConfig, rng: Optional[np.random.Generator] = None,
               free_space: Optional[np.ndarray] = None) -> np.ndarray:
    """Ranges for one state (or a batch), with uniform noise when ``rng`` is given."""
    state = np.asarray(state, dtype=float)
    noise = None
    if rng is not None and cfg.noise_halfwidth > 0:
        noise = rng.uniform(-cfg.noise_halfwidth, cfg.noise_halfwidth, size=state.shape[:-1] + (cfg.rays,))
    return _scan(state, np.asarray(walls, dtype=float), cfg, noise, free_space)


def _scan(state, walls, cfg, noise, free_space):
    pos = state[..., :2]
    if free_space is not None:
        ok = np.atleast_1d(inside_polygon(pos, free_space))
        if not np.all(ok):
            raise OutsideMap(np.flatnonzero(~ok))
    ranges = raycast(pos, state[..., 3, None] + cfg.offsets, walls, cfg.max_range)
    if noise is not None:
        ranges = ranges + noise
    if cfg.dropped:
        ranges[..., sorted(cfg.dropped)] = cfg.max_range
    return ranges


def _first_crossing(p0: np.ndarray, p1: np.ndarray, walls: np.ndarray):
    """Earliest fraction in [0, 1] at which the motion ``p0 -> p1`` meets a wall (inf if none)."""
    px, py, ex, ey = _wall_columns(walls, 1)
    dx = p1[:, 0] - p0[:, 0]
    dy = p1[:, 1] - p0[:, 1]
    qx = px - p0[:, 0]
    qy = py - p0[:, 1]
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qx * ey - qy * ex) / denom
        s = (qx * dy - qy * dx) / denom
    t[~((t >= 0) & (t <= 1) & (s >= 0) & (s <= 1))] = np.inf
    return np.minimum.reduce(t, axis=0)


@dataclasses.dataclass(frozen=True, eq=False)
class BicycleHallway(System):
    """Closed-loop bicycle plant; observations are LiDAR ranges.

    Process noise is uniform on ``(x, y, theta)`` with the given half-widths.
    The initial pose is uniform in the ``x0_box`` ranges for ``(x, y, theta)``.
    """

    walls: np.ndarray = dataclasses.field(default_factory=default_hallway)
    free_space: Optional[np.ndarray] = dataclasses.field(default_factory=default_free_space)
    lidar: LidarConfig = LidarConfig()
    dt: float = 0.1
    wheelbase: float = 0.32
    speed: float = 1.0
    max_steer: float = np.pi / 6
    process_halfwidth: Tuple[float, float, float] = (0.002, 0.002, 0.005)
    x0_box: Tuple[Tuple[float, float], ...] = ((0.5, 1.0), (-0.2, 0.2), (-0.1, 0.1))
    min_wall_distance: float = 0.1  # d_w in the clearance constraint

    state_dim = 4
    control_dim = 1

    def __post_init__(self):
        object.__setattr__(self, "walls", np.asarray(self.walls, dtype=float))
        if self.free_space is not None:
            object.__setattr__(self, "free_space", np.asarray(self.free_space, dtype=float))
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def obs_dim(self) -> int:
        return self.lidar.rays

    def initial_state(self, rng):
        (x_lo, x_hi), (y_lo, y_hi), (t_lo, t_hi) = self.x0_box
        u = rng.uniform(size=3)
        return np.array([
            x_lo + (x_hi - x_lo) * u[0],
            y_lo + (y_hi - y_lo) * u[1],
            self.speed,
            t_lo + (t_hi - t_lo) * u[2],
        ])

    def process_noise(self, rng, steps):
        return rng.uniform(-1.0, 1.0, size=(steps, 3)) * np.asarray(self.process_halfwidth)

    def measurement_noise(self, rng, steps):
        h = self.lidar.noise_halfwidth
        return rng.uniform(-h, h, size=(steps, self.lidar.rays))

    def step(self, x, u, v):
        nxt = bicycle_step(x, steering_angle(u[:, 0], self.max_steer), self.dt, self.wheelbase)
        nxt[:, 0] += v[:, 0]
        nxt[:, 1] += v[:, 1]
        nxt[:, 3] = wrap_angle(nxt[:, 3] + v[:, 2])
        return nxt

    def observe(self, x, w):
        return _scan(x, self.walls, self.lidar, w, self.free_space)

    def settle(self, x, x_next):
        """A motion segment that meets a wall ends at the contact point."""
        frac = _first_crossing(x[:, :2], x_next[:, :2], self.walls)
        crashed = np.isfinite(frac)
        if np.any(crashed):
            x_next = x_next.copy()
            f = frac[crashed, None]
            x_next[crashed, :2] = x[crashed, :2] + f * (x_next[crashed, :2] - x[crashed, :2])
        return x_next, crashed

    def clearance(self, states) -> np.ndarray:
        """``h(x) = d_wall(x) - d_w``; nonnegative when the car keeps its distance."""
        return wall_distance(np.asarray(states)[..., :2], self.walls) - self.min_wall_distance

    def constraint(self, horizon=None) -> ConstraintSpec:
        """Clearance constraint; its robustness cost is bounded above by ``d_w``."""
        return ConstraintSpec(PredicateAtom("clearance", Functional(self.clearance, dim=4)), horizon)

    @property
    def cost_support_bound(self) -> float:
        return self.min_wall_distance


class DroppedRays(Perturbation):
    """At the start of each trial ``k`` rays are chosen and read ``max_range`` for the whole trial."""

    name = "dropped_rays"

    def __init__(self, k: int = 5):
        if k < 0:
            raise ValueError("k must be nonnegative")
        self.k = int(k)

    def setup(self, system, rng, steps):
        mask = np.zeros(system.lidar.rays, dtype=bool)
        mask[rng.choice(system.lidar.rays, size=min(self.k, system.lidar.rays), replace=False)] = True
        return {"dropped": mask}

    def observe(self, system, y, x, ctx, t):
        return np.where(ctx["dropped"], system.lidar.max_range, y)


class StructuredLidar(Perturbation):
    """Stand-in for a learned LiDAR model: per-ray bias fixed per trial,
    range-proportional Gaussian noise and independent per-step ray drops."""

    name = "structured_lidar"

    def __init__(self, bias_halfwidth: float = 0.05, noise_per_meter: float = 0.02,
                 drop_probability: float = 0.05):
        self.bias_halfwidth = float(bias_halfwidth)
        self.noise_per_meter = float(noise_per_meter)
        self.drop_probability = float(drop_probability)

    def setup(self, system, rng, steps):
        rays = system.lidar.rays
        return {
            "bias": rng.uniform(-self.bias_halfwidth, self.bias_halfwidth, size=rays),
            "noise": rng.standard_normal(size=(steps, rays)),
            "drop": rng.uniform(size=(steps, rays)) < self.drop_probability,
        }

    def observe(self, system, y, x, ctx, t):
        r = system.lidar.max_range
        out = y + ctx["bias"] + self.noise_per_meter * np.clip(y, 0.0, r) * ctx["noise"][:, t]
        return np.where(ctx["drop"][:, t], r, np.clip(out, 0.0, r))


def _wall_fit(y: np.ndarray, angles: np.ndarray, max_range: float):
    """Distance to and direction of the nearest wall seen by a fan of rays.

    A line is fitted through the nearest valid return and its nearer
    neighbour. Returns the perpendicular distance and the wall angle in the
    car frame, wrapped to ``[-pi/2, pi/2)``. Rays at ``max_range`` are treated
    as missing; if no line can be fitted the angle defaults to zero.
    """
    rows = np.arange(y.shape[0])
    r = np.where(y >= max_range - 1e-9, np.inf, y)
    finite = np.isfinite(r)
    px = np.where(finite, r * np.cos(angles), np.inf)
    py = np.where(finite, r * np.sin(angles), np.inf)
    last = r.shape[1] - 1
    k = np.argmin(r, axis=1)
    lo, hi = np.clip(k - 1, 0, last), np.clip(k + 1, 0, last)
    j = np.where(r[rows, lo] <= r[rows, hi], lo, hi)
    j = np.where(j == k, np.where(k == 0, hi, lo), j)
    with np.errstate(invalid="ignore"):
        dx = px[rows, j] - px[rows, k]
        dy = py[rows, j] - py[rows, k]
        dist = np.abs(px[rows, k] * dy - py[rows, k] * dx) / np.hypot(dx, dy)
        phi = np.mod(np.arctan2(dy, dx) + np.pi / 2, np.pi) - np.pi / 2
    ok = np.isfinite(dist) & np.isfinite(phi)
    dist = np.where(ok, dist, np.minimum(r.min(axis=1), max_range))
    return dist, np.where(ok, phi, 0.0)


class CorridorFollower:
    """Scripted LiDAR controller holding a lateral offset from the corridor centre.

    Walls on each side are fitted from the rays more than ``side_angle`` off
    the heading. The desired heading relative to the walls is proportional to
    the lateral error, plus a turn toward the more open side when the forward
    rays see a wall within ``front_range``; steering tracks that heading.
    Positive ``offset`` shifts the car toward the right wall, so a larger
    offset leaves a smaller margin in the right-hand turn.
    """

    def __init__(self, offset: float = 0.0, lidar: LidarConfig = LidarConfig(), lateral_gain: float = 2.0,
                 heading_gain: float = 20.0, turn_gain: float = 0.5, front_range: float = 1.5,
                 side_angle: float = np.deg2rad(40.0)):
        self.offset = float(offset)
        self.lateral_gain = float(lateral_gain)
        self.heading_gain = float(heading_gain)
        self.turn_gain = float(turn_gain)
        self.front_range = float(front_range)
        self.max_range = lidar.max_range
        a = lidar.offsets
        self._right, self._left, self._front = a < -side_angle, a > side_angle, np.abs(a) < 0.5
        self._angles = a

    def __call__(self, y):
        a = self._angles
        d_r, phi_r = _wall_fit(y[:, self._right], a[self._right], self.max_range)
        d_l, phi_l = _wall_fit(y[:, self._left], a[self._left], self.max_range)
        wall_angle = np.where(d_r < d_l, phi_r, phi_l)  # minus the heading relative to the nearer wall
        front = y[:, self._front].min(axis=1)
        turn = self.turn_gain * np.maximum(0.0, self.front_range - front) * np.sign(d_l - d_r)
        desired = np.clip(self.lateral_gain * ((d_l - d_r) / 2.0 - self.offset) + turn, -1.0, 1.0)
        cmd = self.heading_gain * (desired + wall_angle)
        return np.clip(cmd, -STEER_COMMAND_LIMIT, STEER_COMMAND_LIMIT)[:, None]


def scripted_bicycle_controllers(lidar: LidarConfig = LidarConfig()) -> dict:
    """Three baselines with strictly decreasing safety margins."""
    return {
        "center": CorridorFollower(0.0, lidar=lidar),
        "offset_0.25": CorridorFollower(0.25, lidar=lidar),
        "offset_0.45": CorridorFollower(0.45, lidar=lidar),
    }

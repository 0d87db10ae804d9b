import numpy as np
import pytest

from stlrisk.sim import (
    BicycleHallway, DroppedRays, LidarConfig, OutsideMap, StructuredLidar, SystemModel, TrialConfig,
    TrialError, bicycle_step, default_hallway, lidar_scan, load_map, monte_carlo, raycast,
    raycast_reference, save_map, scripted_bicycle_controllers, simulate, wall_distance,
)
from stlrisk.sim.bicycle import default_free_space, inside_polygon, steering_angle, wrap_angle
from stlrisk.sim.controllers import ConstantController

WALLS = default_hallway()
NOISE_FREE = LidarConfig(noise_halfwidth=0.0)


# ray casting


def test_raycast_matches_reference_on_random_poses():
    rng = np.random.default_rng(0)
    n = 10_000
    origins = np.column_stack([rng.uniform(-1, 12, n), rng.uniform(-11, 2, n)])
    angles = rng.uniform(-np.pi, np.pi, size=(n, 1))
    got = raycast(origins, angles, WALLS, 5.0)[:, 0]
    want = np.array([raycast_reference(o, a, WALLS, 5.0) for o, a in zip(origins, angles[:, 0])])
    assert np.allclose(got, want, atol=1e-9, rtol=0)


def test_raycast_axis_aligned_rays_match_reference_exactly():
    # rays parallel to walls exercise the zero-denominator branch
    rng = np.random.default_rng(1)
    origins = np.column_stack([rng.uniform(0.5, 9, 500), rng.uniform(-0.7, 0.7, 500)])
    for a in (0.0, np.pi / 2, np.pi, -np.pi / 2):
        got = raycast(origins, np.full((500, 1), a), WALLS, 5.0)[:, 0]
        want = [raycast_reference(o, a, WALLS, 5.0) for o in origins]
        assert np.allclose(got, want, atol=1e-12, rtol=0)


def test_centered_perpendicular_rays_see_half_width():
    state = np.array([5.0, 0.0, 1.0, 0.0])
    scan = lidar_scan(state, WALLS, NOISE_FREE)
    assert scan[0] == pytest.approx(0.75)  # rightmost ray, -90 degrees
    assert scan[-1] == pytest.approx(0.75)  # leftmost ray, +90 degrees


def test_open_corridor_ray_clips_to_max_range():
    scan = lidar_scan(np.array([1.0, 0.0, 1.0, 0.0]), WALLS, NOISE_FREE)
    assert scan[10] == 5.0
    back = lidar_scan(np.array([1.0, 0.0, 1.0, np.pi]), WALLS, NOISE_FREE)
    assert back[10] == pytest.approx(1.0)  # facing the back wall


def test_scan_noise_is_bounded_uniform():
    rng = np.random.default_rng(2)
    state = np.array([5.0, 0.0, 1.0, 0.0])
    clean = lidar_scan(state, WALLS, NOISE_FREE)
    noisy = lidar_scan(np.tile(state, (2000, 1)), WALLS, LidarConfig(), rng)
    err = noisy - clean
    assert np.all(np.abs(err) <= 0.05)
    assert abs(err.mean()) < 0.002


def test_scan_dropped_rays_read_max_range():
    cfg = LidarConfig(noise_halfwidth=0.0, dropped=frozenset({0, 20}))
    scan = lidar_scan(np.array([5.0, 0.0, 1.0, 0.0]), WALLS, cfg)
    assert scan[0] == scan[20] == 5.0


def test_outside_map():
    with pytest.raises(OutsideMap) as info:
        lidar_scan(np.array([[5.0, 0.0, 1.0, 0.0], [5.0, 3.0, 1.0, 0.0]]), WALLS, NOISE_FREE,
                   free_space=default_free_space())
    assert info.value.rows.tolist() == [1]


def test_lidar_config_validation():
    with pytest.raises(ValueError):
        LidarConfig(rays=0)
    with pytest.raises(ValueError):
        LidarConfig(max_range=0)
    with pytest.raises(ValueError):
        LidarConfig(dropped=frozenset({21}))
    assert LidarConfig(rays=1).offsets.tolist() == [0.0]


def test_wall_distance_and_polygon():
    pts = np.array([[5.0, 0.0], [5.0, 0.7], [10.0, -5.0]])
    assert wall_distance(pts, WALLS) == pytest.approx([0.75, 0.05, 0.75])
    poly = default_free_space()
    assert inside_polygon(np.array([[5.0, 0.0], [5.0, 2.0], [0.0, 0.0]]), poly).tolist() == [True, False, True]


def test_map_round_trip(tmp_path):
    save_map(tmp_path / "map.json", WALLS)
    assert np.array_equal(load_map(tmp_path / "map.json"), WALLS)
    (tmp_path / "bad.json").write_text('{"walls": [[0, 1, 2]]}')
    with pytest.raises(ValueError):
        load_map(tmp_path / "bad.json")


# kinematics


def test_straight_line_step():
    s = bicycle_step(np.array([1.0, 2.0, 1.5, 0.0]), 0.0, dt=0.1)
    assert s == pytest.approx([1.15, 2.0, 1.5, 0.0])


def test_symmetric_steering_mirrors_y():
    s0 = np.array([0.0, 0.0, 1.0, 0.0])
    left = right = s0
    for _ in range(20):
        left = bicycle_step(left, 0.3)
        right = bicycle_step(right, -0.3)
    assert left[0] == pytest.approx(right[0], abs=1e-12)
    assert left[1] == pytest.approx(-right[1], abs=1e-12)
    assert left[3] == pytest.approx(-right[3], abs=1e-12)


def test_turning_radius_at_full_lock():
    dt, wheelbase, steer = 0.01, 0.32, np.pi / 6
    radius = wheelbase / np.tan(steer)
    s = np.array([0.0, 0.0, 1.0, 0.0])
    pts = []
    for _ in range(int(2 * np.pi * radius / dt)):
        s = bicycle_step(s, steer, dt, wheelbase)
        pts.append(s[:2])
    pts = np.array(pts)
    # algebraic circle fit x^2 + y^2 + D x + E y + F = 0
    m = np.column_stack([pts, np.ones(len(pts))])
    d, e, f = np.linalg.lstsq(m, -(pts ** 2).sum(axis=1), rcond=None)[0]
    fitted = np.sqrt(d * d / 4 + e * e / 4 - f)
    assert fitted == pytest.approx(radius, rel=0.01)


def test_speed_conserved_and_lag_mode():
    s = np.array([0.0, 0.0, 1.0, 0.3])
    for _ in range(50):
        s = bicycle_step(s, 0.2)
    assert s[2] == 1.0
    lagged = bicycle_step(np.array([0.0, 0.0, 1.0, 0.0]), 0.0, dt=0.1, speed_command=2.0, speed_tau=0.5)
    assert lagged[2] == pytest.approx(1.2)


def test_steering_command_mapping_and_wrap():
    assert steering_angle(15.0) == pytest.approx(np.pi / 6)
    assert steering_angle(-40.0) == pytest.approx(-np.pi / 6)
    assert steering_angle(7.5) == pytest.approx(np.pi / 12)
    assert wrap_angle(np.pi) == np.pi
    assert wrap_angle(-np.pi) == np.pi
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


# closed-loop plant


def test_zero_noise_constant_control_is_predictable():
    sys_ = BicycleHallway(lidar=NOISE_FREE, process_halfwidth=(0.0, 0.0, 0.0),
                          x0_box=((1.0, 1.0), (0.0, 0.0), (0.0, 0.0)))
    states = simulate(SystemModel(sys_), ConstantController([0.0]), TrialConfig(horizon=20), [0])
    want_x = 1.0 + 0.1 * np.arange(21)
    assert states[0, :, 0] == pytest.approx(want_x, abs=1e-12)
    assert np.all(states[0, :, 1] == 0.0)


def test_crash_freezes_at_contact_point():
    sys_ = BicycleHallway(lidar=NOISE_FREE, process_halfwidth=(0.0, 0.0, 0.0),
                          x0_box=((1.0, 1.0), (0.0, 0.0), (1.2, 1.2)))
    states = simulate(SystemModel(sys_), ConstantController([0.0]), TrialConfig(horizon=30), [0])[0]
    assert states[-1, 1] == pytest.approx(0.75, abs=1e-12)  # touching the left wall
    hit = int(np.argmax(states[:, 1] >= 0.75 - 1e-12))
    assert np.all(states[hit:] == states[hit])
    cost = -np.min(sys_.clearance(states))
    assert cost == pytest.approx(sys_.cost_support_bound)


def test_clearance_constraint_spec():
    sys_ = BicycleHallway()
    c = sys_.constraint()
    x = np.array([[5.0, 0.0, 1.0, 0.0]])
    assert c.atom.signed_distance(x) == pytest.approx([0.65])


def test_outside_map_becomes_trial_error():
    sys_ = BicycleHallway(x0_box=((5.0, 5.0), (3.0, 3.0), (0.0, 0.0)))
    with pytest.raises(TrialError) as info:
        simulate(SystemModel(sys_), ConstantController([0.0]), TrialConfig(horizon=2), [4])
    assert info.value.trial_index == 4


# perturbations


def test_dropped_rays_fixed_per_trial():
    sys_ = BicycleHallway()
    pert = DroppedRays(5)
    rng = np.random.default_rng(3)
    ctx = pert.setup(sys_, rng, 10)
    assert ctx["dropped"].sum() == 5
    y = np.ones((1, 21))
    out = pert.observe(sys_, y, None, {"dropped": ctx["dropped"][None]}, 0)
    assert np.all(out[0, ctx["dropped"]] == 5.0) and np.all(out[0, ~ctx["dropped"]] == 1.0)
    with pytest.raises(ValueError):
        DroppedRays(-1)


def test_structured_lidar_stays_in_range():
    sys_ = BicycleHallway()
    pert = StructuredLidar(bias_halfwidth=0.5, noise_per_meter=0.5, drop_probability=0.2)
    ctx = pert.setup(sys_, np.random.default_rng(4), 5)
    batch = {k: v[None] for k, v in ctx.items()}
    y = np.full((1, 21), 4.9)
    out = pert.observe(sys_, y, None, batch, 0)
    assert np.all((out >= 0) & (out <= 5.0))
    assert np.all(out[0, ctx["drop"][0]] == 5.0)


def test_scripted_controllers_are_ordered_by_margin():
    sys_ = BicycleHallway()
    ctrls = scripted_bicycle_controllers(sys_.lidar)
    assert list(ctrls) == ["center", "offset_0.25", "offset_0.45"]
    cfg = TrialConfig(master_seed=1, horizon=150, chunk_size=200)
    var = {}
    for name, ctrl in ctrls.items():
        costs = monte_carlo(SystemModel(sys_), ctrl, sys_.constraint(), 200, cfg)
        var[name] = np.quantile(costs.values, 0.9)
        assert costs.sorted[-1] <= sys_.cost_support_bound
    assert var["center"] < var["offset_0.25"] < var["offset_0.45"] < 0

import numpy as np
import pytest

from footnav.earth import WGS84, GeodeticPosition, geodetic_to_ecef, n_to_e_rotation
from footnav.gaitsim import (
    GaitParams,
    build_square_walk,
    build_truth,
    body_to_ecef_batch,
    right_foot_init,
    right_foot_offset_n0,
    swing_kinematics,
    turn_kinematics,
)
from footnav.strapdown import LEFT, RIGHT

DEFAULTS = GaitParams()


def test_swing_start_is_at_rest():
    dp, v, pitch = swing_kinematics(0.0, DEFAULTS)
    np.testing.assert_allclose(dp, np.zeros(3), atol=1e-15)
    np.testing.assert_allclose(v, np.zeros(3), atol=1e-15)
    assert float(pitch) == 0.0


def test_swing_end_advances_one_stride():
    dp, v, pitch = swing_kinematics(DEFAULTS.swing_time, DEFAULTS)
    np.testing.assert_allclose(dp, [1.3, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(v, np.zeros(3), atol=1e-12)


def test_swing_peak_height():
    dp, _, _ = swing_kinematics(DEFAULTS.swing_time / 2.0, DEFAULTS)
    assert dp[1] == pytest.approx(0.14, abs=1e-15)


def test_swing_heading_rotates_displacement():
    p = GaitParams(heading0=np.pi / 2)
    dp, _, _ = swing_kinematics(p.swing_time, p)
    np.testing.assert_allclose(dp, [0.0, 0.0, 1.3], atol=1e-12)


def test_swing_rejects_out_of_range():
    with pytest.raises(ValueError):
        swing_kinematics(-0.1, DEFAULTS)
    with pytest.raises(ValueError):
        swing_kinematics(DEFAULTS.swing_time + 0.1, DEFAULTS)


def test_turn_endpoints_and_midpoint():
    t_r = 0.2
    assert turn_kinematics(0.0, t_r, 0.3) == pytest.approx(0.3)
    assert turn_kinematics(t_r, t_r, 0.3) == pytest.approx(0.3 + np.pi / 2)
    assert turn_kinematics(t_r / 2, t_r, 0.3) == pytest.approx(0.3 + np.pi / 4)


def test_right_foot_offset_cases():
    np.testing.assert_allclose(
        right_foot_offset_n0(0.0, 1.3), [0.65, 0.0, 0.65], atol=1e-15
    )
    np.testing.assert_allclose(
        right_foot_offset_n0(np.pi / 2, 1.3), [0.65, 0.0, -0.65], atol=1e-12
    )
    np.testing.assert_allclose(right_foot_offset_n0(0.7, 0.0), np.zeros(3), atol=1e-15)


def test_right_foot_init_geodetic():
    left0 = GeodeticPosition.from_degrees(31.0, 121.0, 0.0)
    r0 = right_foot_init(0.0, 1.3, left0)
    d_e = geodetic_to_ecef(r0) - geodetic_to_ecef(left0)
    d_n = n_to_e_rotation(left0).T @ d_e
    np.testing.assert_allclose(d_n, [0.65, 0.0, 0.65], atol=1e-6)


def test_walk_duration_and_distance_reference_parameters():
    p = GaitParams(side_strides=25, laps=8)
    assert p.walk_duration == pytest.approx(966.4, abs=1e-9)
    assert p.total_distance == pytest.approx(1040.0, abs=1e-12)


def test_lap_closes_exactly():
    p = GaitParams(side_strides=3, laps=2, tail=0.4)
    truth = build_truth(p, LEFT)
    assert np.linalg.norm(truth.pos_n0[-1] - truth.pos_n0[0]) < 1e-9
    truth_r = build_truth(p, RIGHT)
    np.testing.assert_allclose(
        truth_r.pos_n0[-1], truth_r.pos_n0[0], atol=1e-9
    )


def test_stance_flag_implies_zero_velocity():
    p = GaitParams(side_strides=3, laps=1, tail=0.4)
    truth = build_truth(p, LEFT)
    assert np.all(np.abs(truth.vel_n0[truth.stance]) < 1e-12)


def test_right_foot_is_delayed_left():
    p = GaitParams(side_strides=3, laps=1, tail=0.4)
    tl = build_truth(p, LEFT)
    tr = build_truth(p, RIGHT)
    delay = round(p.cycle_time / 2 * p.imu_rate)
    offset = right_foot_offset_n0(p.heading0, p.stride)
    n = len(tl) - delay
    np.testing.assert_allclose(
        tr.pos_n0[delay : delay + n], tl.pos_n0[:n] + offset, atol=1e-12
    )
    np.testing.assert_allclose(tr.euler[delay : delay + n], tl.euler[:n], atol=1e-12)


def test_truth_velocity_matches_position_derivative():
    p = GaitParams(side_strides=3, laps=1, tail=0.4)
    truth = build_truth(p, LEFT)
    dt = 1.0 / p.imu_rate
    fd = (truth.pos_n0[2:] - truth.pos_n0[:-2]) / (2.0 * dt)
    err = np.abs(fd - truth.vel_n0[1:-1])
    # Acceleration jumps at segment boundaries make the central difference
    # O(dt) there; identify them by the acceleration discontinuity itself.
    jump = np.abs(np.diff(truth.acc_n0, axis=0)).max(axis=1) > 1.0
    boundary = np.zeros(len(truth), dtype=bool)
    idx = np.flatnonzero(jump)
    for k in idx:
        boundary[max(k - 1, 0) : k + 3] = True
    interior = ~boundary[1:-1]
    assert err[interior].max() < 5e-3   # dt^2 * |v'''| scale
    assert err.max() < 0.06             # dt * |jump(a)| / 4 scale


def test_stationary_stance_imu_outputs():
    p = GaitParams(side_strides=2, laps=1, tail=0.4)
    sim = build_square_walk(p, seed=0)
    truth, imu = sim.truth_left, sim.imu_left
    # Stance interior: boundary samples carry the band-limited (two-sided
    # averaged) acceleration value, not the stationary one.
    stance = truth.stance.copy()
    stance[1:] &= truth.stance[:-1]
    stance[:-1] &= truth.stance[1:]
    gn = np.linalg.norm(imu.gyro[stance], axis=1)
    np.testing.assert_allclose(gn, WGS84.rotation_rate, rtol=1e-9)
    from footnav.earth import gravity_magnitude

    an = np.linalg.norm(imu.accel[stance], axis=1)
    gam = gravity_magnitude(truth.lat[stance], truth.h[stance])
    np.testing.assert_allclose(an, gam, atol=1e-6)


def test_same_seed_bit_identical():
    p = GaitParams(side_strides=2, laps=1, sigma_g=1e-4, sigma_a=1e-3,
                   range_noise=0.02, tail=0.4)
    a = build_square_walk(p, seed=7)
    b = build_square_walk(p, seed=7)
    np.testing.assert_array_equal(a.imu_left.gyro, b.imu_left.gyro)
    np.testing.assert_array_equal(a.imu_right.accel, b.imu_right.accel)
    np.testing.assert_array_equal(a.ranges.d, b.ranges.d)
    c = build_square_walk(p, seed=8)
    assert not np.array_equal(a.imu_left.gyro, c.imu_left.gyro)


def test_range_of_initial_pose():
    p = GaitParams(side_strides=2, laps=1, range_noise=0.0,
                   lever_left=(0, 0, 0), lever_right=(0, 0, 0), tail=0.4)
    sim = build_square_walk(p, seed=0)
    assert sim.ranges.d[0] == pytest.approx(np.hypot(0.65, 0.65), abs=1e-9)


def test_range_noise_statistics():
    p = GaitParams(side_strides=25, laps=2, range_noise=0.02, tail=0.4)
    sim = build_square_walk(p, seed=3)
    p0 = GaitParams(side_strides=25, laps=2, range_noise=0.0, tail=0.4)
    clean = build_square_walk(p0, seed=3)
    resid = sim.ranges.d - clean.ranges.d
    assert abs(resid.std() - 0.02) / 0.02 < 0.05
    assert len(resid) > 2000


def test_range_sample_rate():
    p = GaitParams(side_strides=2, laps=1, tail=0.4)
    sim = build_square_walk(p, seed=0)
    dt = np.diff(sim.ranges.t)
    np.testing.assert_allclose(dt, 1.0 / p.range_rate, atol=1e-12)


def test_open_loop_reintegration_matches_truth():
    # Simulator and mechanization agree within 5 cm over one lap.
    from footnav.strapdown import ImuIncrements, NavState, increments_from_stream, propagate

    p = GaitParams(side_strides=25, laps=1, tail=0.4)
    sim = build_square_walk(p, seed=0)
    tr = sim.truth_left
    t_e, dth1, dth2, dv1, dv2, dt_e = increments_from_stream(sim.imu_left)
    c0 = body_to_ecef_batch(tr, p)[0]
    st = NavState(C_be=c0.copy(), v_e=np.zeros(3), p_e=tr.p_e[0].copy())
    for k in range(len(t_e)):
        st, _ = propagate(
            st, ImuIncrements(dth1[k], dth2[k], dv1[k], dv2[k], float(dt_e[k]))
        )
    assert np.linalg.norm(st.p_e - tr.p_e[2 * len(t_e)]) < 0.05


def test_bias_walk_changes_outputs():
    p = GaitParams(side_strides=2, laps=1, bias_walk_a=1e-3, tail=0.4)
    sim = build_square_walk(p, seed=1)
    p0 = GaitParams(side_strides=2, laps=1, tail=0.4)
    clean = build_square_walk(p0, seed=1)
    drift = sim.imu_left.accel - clean.imu_left.accel
    assert np.abs(drift[-1]).max() > 0.0
    assert np.abs(drift[0]).max() < 1e-3


def test_params_validation():
    with pytest.raises(ValueError):
        GaitParams(imu_rate=100.0, range_rate=7.0)
    with pytest.raises(ValueError):
        GaitParams(swing_time=0.803)
    with pytest.raises(ValueError):
        GaitParams(stride=-1.0)

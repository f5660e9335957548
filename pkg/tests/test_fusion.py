import numpy as np
import pytest

from footnav import fusion, so3
from footnav.earth import WGS84, GeodeticPosition, geodetic_to_ecef, n_to_e_rotation
from footnav.fusion import (
    JointState,
    NoiseConfig,
    RangeSample,
    inject_and_reset,
    predict,
    transition_matrix,
    update_ellipsoid,
    update_range,
    update_zupt,
)
from footnav.strapdown import LEFT, RIGHT, NavState

POS = GeodeticPosition.from_degrees(31.0, 121.0, 0.0)


def make_state(offset_n=np.zeros(3), yaw=0.0):
    c_ne = n_to_e_rotation(POS)
    return NavState(
        C_be=c_ne @ so3.matrix_from_rpy(0.0, yaw, 0.0),
        v_e=np.zeros(3),
        p_e=geodetic_to_ecef(POS) + c_ne @ np.asarray(offset_n, dtype=float),
    )


def make_joint(p_diag=1.0, right_offset=(0.65, 0.0, 0.65)):
    return JointState(
        left=make_state(),
        right=make_state(right_offset),
        P=np.eye(30) * p_diag,
    )


def test_predict_zero_noise_zero_f_keeps_p():
    # F = 0 requires zero specific force, zero Earth rate: use a tiny-rate
    # model surrogate by checking the delta against the analytic phi.
    js = make_joint(p_diag=0.0)
    js.P = np.zeros((30, 30))
    out = predict(js, np.zeros(3), np.zeros(3), 0.02, NoiseConfig(sigma_g=1e-12, sigma_a=1e-12, sigma_bg=1e-12, sigma_ba=1e-12))
    assert np.abs(out.P).max() < 1e-20


def test_predict_trace_non_decreasing():
    js = make_joint(p_diag=0.01)
    out = predict(js, np.array([0.0, 9.8, 0.0]), np.array([0.0, 9.8, 0.0]),
                  0.02, NoiseConfig())
    assert np.trace(out.P) >= np.trace(js.P)


def test_transition_position_row_couples_velocity():
    # The position block picks up dt * velocity block exactly.
    c = np.eye(3)
    phi = transition_matrix(c, np.zeros(3), c, np.zeros(3), WGS84.rate_vector, 0.02)
    for off in (0, 15):
        np.testing.assert_allclose(
            phi[off + 6 : off + 9, off + 3 : off + 6], 0.02 * np.eye(3), atol=1e-15
        )
        np.testing.assert_allclose(
            phi[off + 6 : off + 9, off + 6 : off + 9], np.eye(3), atol=1e-15
        )


def test_transition_structure_blocks():
    c = so3.exp_map([0.1, 0.2, 0.3])
    f = np.array([1.0, 2.0, 3.0])
    om = WGS84.rate_vector
    dt = 0.02
    phi = transition_matrix(c, f, c, f, om, dt)
    np.testing.assert_allclose(phi[0:3, 9:12], -dt * c, atol=1e-15)
    np.testing.assert_allclose(phi[3:6, 12:15], dt * c, atol=1e-15)
    np.testing.assert_allclose(phi[3:6, 0:3], dt * so3.skew(c @ f), atol=1e-15)
    np.testing.assert_allclose(phi[0:3, 0:3], np.eye(3) - dt * so3.skew(om), atol=1e-15)
    # feet are uncoupled in the dynamics
    assert np.abs(phi[0:15, 15:30]).max() == 0.0


def test_zupt_zero_velocity_no_state_change():
    js = make_joint(p_diag=0.01)
    out, info = update_zupt(js, LEFT, NoiseConfig())
    assert info.applied
    np.testing.assert_allclose(out.left.v_e, np.zeros(3), atol=1e-15)
    np.testing.assert_allclose(out.left.p_e, js.left.p_e, atol=1e-12)
    # velocity variance shrinks
    assert np.trace(out.P[3:6, 3:6]) < np.trace(js.P[3:6, 3:6])


def test_zupt_infinite_sigma_is_noop():
    js = make_joint(p_diag=0.01)
    js.left.v_e = np.array([0.1, 0.0, 0.0])
    out, _ = update_zupt(js, LEFT, NoiseConfig(sigma_v=1e9))
    np.testing.assert_allclose(out.left.v_e, js.left.v_e, atol=1e-12)
    np.testing.assert_allclose(out.P, js.P, rtol=1e-12, atol=1e-15)


def test_zupt_scalar_kalman_oracle():
    # Diagonal P: posterior velocity follows the scalar formula per axis.
    p_v, r = 0.04, 0.05**2
    js = make_joint(p_diag=0.0)
    js.P = np.diag(np.concatenate([np.full(15, 1e-12)] * 2))
    js.P[3, 3] = js.P[4, 4] = js.P[5, 5] = p_v
    js.left.v_e = np.array([0.1, 0.0, 0.0])
    out, _ = update_zupt(js, LEFT, NoiseConfig(sigma_v=0.05))
    expected = 0.1 * (1.0 - p_v / (p_v + r))
    v_out = out.left.v_e
    assert v_out[0] == pytest.approx(expected, rel=1e-9)
    assert abs(v_out[1]) < 1e-12 and abs(v_out[2]) < 1e-12


def test_zupt_right_foot_only_touches_right_block():
    js = make_joint(p_diag=0.01)
    js.right.v_e = np.array([0.05, 0.0, 0.0])
    out, _ = update_zupt(js, RIGHT, NoiseConfig())
    np.testing.assert_allclose(out.left.v_e, js.left.v_e, atol=1e-15)
    assert not np.allclose(out.right.v_e, js.right.v_e)


def test_range_innovation_zero_when_consistent():
    js = make_joint(p_diag=0.01, right_offset=(0.65, 0.0, 0.0))
    d_true = 0.65
    out, info = update_range(
        js, RangeSample(0.0, d_true), NoiseConfig()
    )
    assert info.applied
    assert float(info.innovation[0]) == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(out.left.p_e, js.left.p_e, atol=1e-9)


def test_range_innovation_arithmetic():
    js = make_joint(p_diag=0.01, right_offset=(0.65, 0.0, 0.0))
    out, info = update_range(js, RangeSample(0.0, 0.70), NoiseConfig())
    assert float(info.innovation[0]) == pytest.approx(-0.05, abs=1e-9)


def test_range_predicted_distance_uses_lever_arms():
    lever_l = np.array([0.02, 0.05, -0.03])
    lever_r = np.array([0.03, -0.03, 0.04])
    js = make_joint(p_diag=0.01, right_offset=(0.65, 0.0, 0.65))
    js.left.C_be = js.left.C_be @ so3.exp_map([0.1, -0.2, 0.3])
    js.right.C_be = js.right.C_be @ so3.exp_map([-0.2, 0.1, 0.2])
    tip_l = js.left.p_e + js.left.C_be @ lever_l
    tip_r = js.right.p_e + js.right.C_be @ lever_r
    d_direct = np.linalg.norm(tip_l - tip_r)
    out, info = update_range(
        js, RangeSample(0.0, d_direct, lever_l, lever_r), NoiseConfig()
    )
    assert float(info.innovation[0]) == pytest.approx(0.0, abs=1e-12)


def test_range_degenerate_geometry_skipped():
    js = make_joint(p_diag=0.01, right_offset=(0.01, 0.0, 0.0))
    out, info = update_range(js, RangeSample(0.0, 0.01), NoiseConfig())
    assert not info.applied
    np.testing.assert_array_equal(out.P, js.P)


def test_range_reduces_relative_uncertainty():
    js = make_joint(p_diag=0.01, right_offset=(0.65, 0.0, 0.0))
    out, _ = update_range(js, RangeSample(0.0, 0.60), NoiseConfig())
    # relative position variance along the baseline shrinks
    u = np.zeros(30)
    c_ne = n_to_e_rotation(POS)
    u[6:9] = c_ne[:, 0]
    u[21:24] = -c_ne[:, 0]
    assert u @ out.P @ u < u @ js.P @ u


def test_ellipsoid_zero_innovation_on_anchor_surface():
    js = make_joint(p_diag=0.01)
    anchor = POS
    out, info = update_ellipsoid(js, LEFT, anchor, NoiseConfig())
    # left foot is exactly at the anchor -> on its ellipsoid
    assert float(info.innovation[0]) == pytest.approx(0.0, abs=1e-12)


def test_ellipsoid_height_sensitivity_finite_difference():
    # d(innovation)/dh ~ 2/(R_E+h) at the equator.
    anchor = GeodeticPosition(0.0, 0.0, 0.0)
    base = geodetic_to_ecef(anchor)
    dh = 1.0
    v0, _ = fusion.ellipsoid_residual(base, anchor)
    v1, _ = fusion.ellipsoid_residual(base + np.array([dh, 0.0, 0.0]), anchor)
    r_e = WGS84.semi_major_axis  # transverse radius at equator
    assert (v1 - v0) == pytest.approx(2.0 * dh / r_e, rel=1e-6)


def test_ellipsoid_jacobian_row_structure():
    anchor = GeodeticPosition(0.3, 0.2, 5.0)
    p = geodetic_to_ecef(anchor) + np.array([3.0, -2.0, 1.0])
    _, grad = fusion.ellipsoid_residual(p, anchor)
    s = np.sin(anchor.latitude)
    r_e = WGS84.semi_major_axis / np.sqrt(1.0 - WGS84.e2 * s * s)
    aa = (r_e + anchor.height) ** 2
    bb = (r_e * (1.0 - WGS84.e2) + anchor.height) ** 2
    np.testing.assert_allclose(
        grad, [2.0 * p[0] / aa, 2.0 * p[1] / aa, 2.0 * p[2] / bb], rtol=1e-12
    )


def test_ellipsoid_pulls_height_toward_anchor():
    js = make_joint(p_diag=0.0)
    js.P = np.eye(30) * 1e-12
    for off in (6, 21):
        js.P[off : off + 3, off : off + 3] = np.eye(3) * 0.2**2
    c_ne = n_to_e_rotation(POS)
    js.left.p_e = js.left.p_e + c_ne @ np.array([0.0, 0.5, 0.0])  # 0.5 m high
    h0 = float(np.linalg.norm(js.left.p_e))
    out, info = update_ellipsoid(js, LEFT, POS, NoiseConfig())
    h1 = float(np.linalg.norm(out.left.p_e))
    assert h1 < h0  # pulled down toward the anchor ellipsoid


def test_inject_zero_is_identity():
    js = make_joint(p_diag=0.01)
    out = inject_and_reset(js, np.zeros(30))
    np.testing.assert_array_equal(out.left.p_e, js.left.p_e)
    np.testing.assert_array_equal(out.P, js.P)


def test_inject_position_sign_convention():
    js = make_joint(p_diag=0.01)
    dx = np.zeros(30)
    dx[6:9] = [1.0, 2.0, 3.0]
    out = inject_and_reset(js, dx)
    np.testing.assert_allclose(out.left.p_e, js.left.p_e - [1, 2, 3], atol=1e-12)
    np.testing.assert_array_equal(out.right.p_e, js.right.p_e)


def test_inject_bias_sign_convention():
    js = make_joint(p_diag=0.01)
    dx = np.zeros(30)
    dx[9:12] = [0.01, 0.02, 0.03]
    dx[27:30] = [0.1, 0.2, 0.3]
    out = inject_and_reset(js, dx)
    np.testing.assert_allclose(out.left.b_g, [0.01, 0.02, 0.03], atol=1e-15)
    np.testing.assert_allclose(out.right.b_a, [0.1, 0.2, 0.3], atol=1e-15)


def test_inject_then_recompute_error_is_second_order():
    # Build an erroneous state from truth using the misalignment convention,
    # inject the exact error, and verify the residual is O(|dpsi|^2).
    truth = make_state()
    for mag in (1e-3, 1e-2, 1e-1):
        dpsi = np.array([0.6, -0.3, 0.4]) * mag
        bad = truth.copy()
        bad.C_be = so3.exp_map(-dpsi) @ truth.C_be  # estimate with error dpsi
        js = JointState(bad, make_state(), np.eye(30))
        dx = np.zeros(30)
        dx[0:3] = dpsi
        out = inject_and_reset(js, dx)
        residual = np.linalg.norm(so3.log_map(out.left.C_be @ truth.C_be.T))
        assert residual < 2.0 * mag**2


def test_inject_large_angle_fault():
    js = make_joint(p_diag=0.01)
    dx = np.zeros(30)
    dx[0:3] = [0.6, 0.0, 0.0]
    with pytest.raises(fusion.FilterFault):
        inject_and_reset(js, dx)


def test_sequential_vs_stacked_zupt_equivalence():
    # ZUPT-left then ZUPT-right sequentially equals the jointly stacked
    # 6x30 update (linear measurements at one epoch).
    rng = np.random.default_rng(8)
    a = rng.standard_normal((30, 30))
    p0 = a @ a.T * 1e-4 + np.eye(30) * 1e-6
    js = make_joint()
    js.P = p0.copy()
    js.left.v_e = np.array([0.08, -0.02, 0.03])
    js.right.v_e = np.array([-0.04, 0.06, 0.01])
    noise = NoiseConfig()

    seq, _ = update_zupt(js, LEFT, noise)
    seq, _ = update_zupt(seq, RIGHT, noise)

    h = np.zeros((6, 30))
    h[0:3, 3:6] = np.eye(3)
    h[3:6, 18:21] = np.eye(3)
    z = np.concatenate([js.left.v_e, js.right.v_e])
    r = noise.sigma_v**2 * np.eye(6)
    stacked, _ = fusion._apply_update(js.copy(), h, r, z)

    np.testing.assert_allclose(seq.left.v_e, stacked.left.v_e, atol=1e-9)
    np.testing.assert_allclose(seq.right.v_e, stacked.right.v_e, atol=1e-9)
    np.testing.assert_allclose(seq.P, stacked.P, atol=1e-9)


def test_gating_skips_outliers():
    js = make_joint(p_diag=1e-6)
    js.left.v_e = np.array([5.0, 0.0, 0.0])  # wildly inconsistent with P
    out, info = update_zupt(js, LEFT, NoiseConfig(), gated=True)
    assert not info.applied
    np.testing.assert_array_equal(out.P, js.P)


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(sigma_v=0.0)
    with pytest.raises(ValueError):
        NoiseConfig(sigma_g=-1.0)


def test_range_sample_validation():
    with pytest.raises(ValueError):
        RangeSample(0.0, -1.0)

"""Error-state Kalman filter for the dual-foot system.

Per-foot error vector (15 states, fixed order):

    [dpsi_e (3), dv_e (3), dp_e (3), b_g (3), b_a (3)]

with errors defined as estimate minus truth for attitude/velocity/position
and as the residual true bias for the bias slots, so injection subtracts
the first nine components and adds the bias components into the nominal
bias estimates. The attitude error is the e-frame misalignment in
C~_e^b = C_e^b (I + dpsi x), corrected on injection by
C_b^e <- exp(dpsi) C~_b^e.

The joint state stacks left then right (30 states); ranging couples them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import so3
from ._kernels import _joint_transition, _kalman_update, _predict_cov
from .earth import WGS84, EarthModel, GeodeticPosition
from .strapdown import LEFT, RIGHT, NavState

N_ERR = 15
N_JOINT = 30
ATT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)

# 99.9% chi-square quantiles by measurement dimension, for innovation gating.
CHI2_999 = {1: 10.827566170662733, 2: 13.815510557964274, 3: 16.26623619623813}

MIN_LEVER_SEPARATION = 0.05  # m; range update is degenerate below this


class FilterFault(RuntimeError):
    """Filter produced an invalid covariance or violated a small-angle bound."""


@dataclass(frozen=True)
class NoiseConfig:
    """Continuous-time noise densities and measurement sigmas.

    sigma_g, sigma_a: white gyro/accel noise densities (rad/s, m/s^2 per
    sqrt(Hz)); sigma_bg, sigma_ba: bias random-walk densities; sigma_v,
    sigma_d: ZUPT and range measurement sigmas; sigma_ec: dimensionless
    ellipsoid-constraint sigma (equivalent height sigma ~ sigma_ec * R_E/2).
    """

    sigma_g: float = 1.4544410433286077e-4   # 0.5 deg/sqrt(h)
    sigma_a: float = 1.0e-3
    sigma_bg: float = 1.0e-7
    sigma_ba: float = 1.0e-6
    sigma_v: float = 0.05
    sigma_d: float = 0.05
    sigma_ec: float = 1.0e-7

    def __post_init__(self):
        for name in ("sigma_g", "sigma_a", "sigma_bg", "sigma_ba",
                     "sigma_v", "sigma_d", "sigma_ec"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class RangeSample:
    """Inter-foot distance measurement with the per-foot lever arms."""

    t: float
    d: float
    lever_left: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lever_right: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.d <= 0.0:
            raise ValueError("range must be positive")


@dataclass
class JointState:
    """Both feet's nominal states plus the 30x30 joint error covariance."""

    left: NavState
    right: NavState
    P: np.ndarray

    def foot(self, foot: str) -> NavState:
        return self.left if foot == LEFT else self.right

    def copy(self) -> "JointState":
        return JointState(self.left.copy(), self.right.copy(), self.P.copy())


@dataclass
class UpdateInfo:
    applied: bool
    innovation: np.ndarray
    mahalanobis: float


def initial_covariance(att=0.1, vel=0.05, pos=0.01, bg=0.02, ba=0.3) -> np.ndarray:
    """Diagonal joint P0 from per-block standard deviations."""
    one = np.concatenate(
        [np.full(3, att**2), np.full(3, vel**2), np.full(3, pos**2),
         np.full(3, bg**2), np.full(3, ba**2)]
    )
    return np.diag(np.concatenate([one, one]))


def process_noise_diag(noise: NoiseConfig, dt: float) -> np.ndarray:
    """Diagonal of Qd = D W D^T dt.

    The attitude and velocity rows of D carry +-C_b^e, which is orthonormal,
    so the exact product is diagonal with the raw densities.
    """
    one = np.concatenate(
        [np.full(3, noise.sigma_g**2), np.full(3, noise.sigma_a**2), np.zeros(3),
         np.full(3, noise.sigma_bg**2), np.full(3, noise.sigma_ba**2)]
    )
    return np.concatenate([one, one]) * dt


def transition_matrix(c_left, f_left, c_right, f_right, omega, dt) -> np.ndarray:
    """First-order transition Phi = I + F dt of the joint error model."""
    cs = np.ascontiguousarray(np.stack([c_left, c_right]), dtype=float)
    fs = np.ascontiguousarray(np.stack([f_left, f_right]), dtype=float)
    return _joint_transition(cs, fs, np.ascontiguousarray(omega, dtype=float), float(dt))


def predict(
    js: JointState,
    f_left: np.ndarray,
    f_right: np.ndarray,
    dt: float,
    noise: NoiseConfig,
    model: EarthModel = WGS84,
) -> JointState:
    """Covariance propagation over one epoch (states already propagated).

    f_left/f_right are the mean body-frame specific forces over the interval,
    as returned by strapdown.propagate.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    phi = transition_matrix(
        js.left.C_be, f_left, js.right.C_be, f_right, model.rate_vector, dt
    )
    p_new = _predict_cov(js.P, phi, process_noise_diag(noise, dt))
    _check_psd(p_new)
    return replace(js, P=p_new)


def _check_psd(p: np.ndarray) -> None:
    if not np.all(np.isfinite(p)):
        raise FilterFault("covariance has non-finite entries")
    tr = np.trace(p)
    if tr < 0.0:
        raise FilterFault("covariance trace is negative")


def _apply_update(js, h, r, z, gate_dof=None) -> tuple[JointState, UpdateInfo]:
    h = np.ascontiguousarray(h, dtype=float)
    r = np.ascontiguousarray(r, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    dx, p_new, maha = _kalman_update(js.P, h, r, z)
    if gate_dof is not None and maha > CHI2_999[gate_dof]:
        return js, UpdateInfo(False, z, float(maha))
    _check_psd(p_new)
    out = inject_and_reset(replace(js, P=p_new), dx)
    return out, UpdateInfo(True, z, float(maha))


def update_zupt(
    js: JointState, foot: str, noise: NoiseConfig, gated: bool = False
) -> tuple[JointState, UpdateInfo]:
    """Zero-velocity pseudo-measurement for one foot during stance.

    The innovation is the predicted velocity itself (measured zero), which
    equals the velocity error under the estimate-minus-truth convention.
    """
    off = 0 if foot == LEFT else N_ERR
    h = np.zeros((3, N_JOINT))
    h[:, off + 3 : off + 6] = np.eye(3)
    z = js.foot(foot).v_e.copy()
    r = noise.sigma_v**2 * np.eye(3)
    return _apply_update(js, h, r, z, gate_dof=3 if gated else None)


def update_range(
    js: JointState, rng: RangeSample, noise: NoiseConfig, gated: bool = False
) -> tuple[JointState, UpdateInfo]:
    """Inter-foot range update.

    H rows follow the ranging measurement model: the unit vector along the
    predicted lever-to-lever offset projects attitude and position errors of
    both feet. Skipped (applied=False) when the predicted offset is shorter
    than the degeneracy guard.
    """
    el = js.left.C_be @ np.asarray(rng.lever_left, dtype=float)
    er = js.right.C_be @ np.asarray(rng.lever_right, dtype=float)
    delta = js.left.p_e + el - (js.right.p_e + er)
    dist = float(np.linalg.norm(delta))
    if dist <= MIN_LEVER_SEPARATION:
        return js, UpdateInfo(False, np.array([0.0]), 0.0)
    u = delta / dist
    h = np.zeros((1, N_JOINT))
    h[0, ATT] = u @ so3.skew(el)
    h[0, POS] = u
    h[0, N_ERR + 0 : N_ERR + 3] = -(u @ so3.skew(er))
    h[0, N_ERR + 6 : N_ERR + 9] = -u
    z = np.array([dist - rng.d])
    r = np.array([[noise.sigma_d**2]])
    return _apply_update(js, h, r, z, gate_dof=1 if gated else None)


def ellipsoid_residual(p_e, anchor: GeodeticPosition, model: EarthModel = WGS84):
    """Constraint value and its position Jacobian row.

    The anchor's transverse curvature radius and height define the ellipsoid
    (x^2+y^2)/(R_E+h)^2 + z^2/(R_E(1-e^2)+h)^2 = 1; returns (value - 1, d/dp).
    """
    s = np.sin(anchor.latitude)
    r_e = model.semi_major_axis / np.sqrt(1.0 - model.e2 * s * s)
    aa = (r_e + anchor.height) ** 2
    bb = (r_e * (1.0 - model.e2) + anchor.height) ** 2
    x, y, z = p_e
    value = (x * x + y * y) / aa + z * z / bb - 1.0
    grad = np.array([2.0 * x / aa, 2.0 * y / aa, 2.0 * z / bb])
    return value, grad


def update_ellipsoid(
    js: JointState,
    foot: str,
    anchor: GeodeticPosition,
    noise: NoiseConfig,
    model: EarthModel = WGS84,
    gated: bool = False,
) -> tuple[JointState, UpdateInfo]:
    """Common-ellipsoid height constraint against a previous stance anchor."""
    off = 0 if foot == LEFT else N_ERR
    value, grad = ellipsoid_residual(js.foot(foot).p_e, anchor, model)
    h = np.zeros((1, N_JOINT))
    h[0, off + 6 : off + 9] = grad
    z = np.array([value])
    r = np.array([[noise.sigma_ec**2]])
    return _apply_update(js, h, r, z, gate_dof=1 if gated else None)


def inject_and_reset(js: JointState, dx: np.ndarray) -> JointState:
    """Fold an estimated error vector into the nominal states and zero it.

    Attitude uses the (I + dpsi x) misalignment convention; velocity and
    position subtract their error estimates; biases accumulate additively.
    Covariance is left untouched.
    """
    dx = np.asarray(dx, dtype=float)
    if dx.shape != (N_JOINT,):
        raise ValueError("error vector must have 30 components")
    out = js.copy()
    for foot, state in ((LEFT, out.left), (RIGHT, out.right)):
        off = 0 if foot == LEFT else N_ERR
        d = dx[off : off + N_ERR]
        dpsi = d[ATT]
        if np.linalg.norm(dpsi) >= 0.5:
            raise FilterFault(f"attitude correction {np.linalg.norm(dpsi):.3f} rad "
                              f"exceeds small-angle bound (foot {foot})")
        state.C_be = so3.exp_map(dpsi) @ state.C_be
        state.C_be = 0.5 * (3.0 * state.C_be - state.C_be @ state.C_be.T @ state.C_be)
        state.v_e = state.v_e - d[VEL]
        state.p_e = state.p_e - d[POS]
        state.b_g = state.b_g + d[BG]
        state.b_a = state.b_a + d[BA]
    return out

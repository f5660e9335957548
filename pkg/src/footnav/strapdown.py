"""ECEF-frame strapdown mechanization for one foot-mounted IMU.

Raw rate samples are bridged to increments by trapezoidal integration over
half-intervals; each navigation update consumes two consecutive increments
(two-sample correction), so a 100 Hz stream propagates at 50 Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import so3
from ._kernels import _nav_step, _two_sample
from .earth import WGS84, EarthModel, GeodeticPosition, geodetic_to_ecef, n_to_e_rotation

LEFT = "L"
RIGHT = "R"


class PropagationError(RuntimeError):
    """Strapdown propagation produced an invalid state."""


class InitializationError(RuntimeError):
    """Stationary alignment could not be performed."""


@dataclass
class ImuSample:
    """One timestamped IMU record: gyro in rad/s, accel in m/s^2."""

    t: float
    gyro: np.ndarray
    accel: np.ndarray
    foot: str = LEFT


@dataclass
class ImuStream:
    """Columnar IMU stream for one foot; timestamps strictly increasing."""

    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    foot: str = LEFT

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.gyro = np.asarray(self.gyro, dtype=float)
        self.accel = np.asarray(self.accel, dtype=float)
        n = self.t.shape[0]
        if self.gyro.shape != (n, 3) or self.accel.shape != (n, 3):
            raise ValueError("gyro/accel must be (N, 3) matching t")
        if n > 1 and not np.all(np.diff(self.t) > 0.0):
            raise ValueError(f"timestamps not strictly increasing (foot {self.foot})")
        if not (np.all(np.isfinite(self.gyro)) and np.all(np.isfinite(self.accel))):
            raise ValueError("non-finite IMU components")

    def __len__(self):
        return self.t.shape[0]

    def slice(self, i0: int, i1: int) -> "ImuStream":
        return ImuStream(self.t[i0:i1], self.gyro[i0:i1], self.accel[i0:i1], self.foot)


@dataclass
class ImuIncrements:
    """Angle/velocity increments of the two halves of one update interval."""

    dtheta1: np.ndarray
    dtheta2: np.ndarray
    dv1: np.ndarray
    dv2: np.ndarray
    dt: float

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("update interval must be positive")


@dataclass
class NavState:
    """Nominal navigation state of one foot.

    C_be rotates body vectors into ECEF; v_e and p_e are ECEF velocity and
    position; b_g and b_a are the current gyro/accel bias estimates.
    """

    C_be: np.ndarray
    v_e: np.ndarray
    p_e: np.ndarray
    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    def copy(self) -> "NavState":
        return NavState(
            self.C_be.copy(),
            self.v_e.copy(),
            self.p_e.copy(),
            self.b_g.copy(),
            self.b_a.copy(),
            self.t,
        )


def increments_from_stream(stream: ImuStream):
    """Half-interval increments paired for two-sample updates.

    Each update interval spans samples [2k, 2k+2]; the two half increments
    integrate the parabola through the three rate samples (Simpson split),
    which is exact for the linear-rate model behind the two-sample scheme
    and 4th-order for the combined interval.

    Returns (t_epoch, dtheta1, dtheta2, dv1, dv2, dt_epoch) with t_epoch the
    interval end times.
    """
    n_epochs = (len(stream) - 1) // 2
    if n_epochs < 1:
        raise ValueError("need at least 3 samples for one two-sample update")
    n = 2 * n_epochs

    def split(data):
        a = data[0:n:2]
        b = data[1 : n + 1 : 2]
        c = data[2 : n + 2 : 2]
        h = 0.5 * (stream.t[2 : n + 1 : 2] - stream.t[0:n:2])[:, None]
        first = h * (5.0 * a + 8.0 * b - c) / 12.0
        second = h * (-a + 8.0 * b + 5.0 * c) / 12.0
        return first, second

    dth1, dth2 = split(stream.gyro)
    dv1, dv2 = split(stream.accel)
    t_epoch = stream.t[2 : n + 1 : 2]
    dt_epoch = stream.t[2 : n + 1 : 2] - stream.t[0:n:2]
    return t_epoch, dth1, dth2, dv1, dv2, dt_epoch


def two_sample_delta(incr: ImuIncrements):
    """Combined rotation and sculling-corrected velocity increment.

    dtheta = dtheta1 + dtheta2;
    dv = dv1 + dv2 + 0.5*dtheta x (dv1+dv2) + 2/3*(dtheta1 x dv2 + dv1 x dtheta2).
    """
    return _two_sample(
        np.ascontiguousarray(incr.dtheta1, dtype=float),
        np.ascontiguousarray(incr.dtheta2, dtype=float),
        np.ascontiguousarray(incr.dv1, dtype=float),
        np.ascontiguousarray(incr.dv2, dtype=float),
    )


def propagate(
    state: NavState, incr: ImuIncrements, model: EarthModel = WGS84
) -> tuple[NavState, np.ndarray]:
    """One mechanization step. Returns (new state, mean specific force).

    Attitude: C <- C exp(dtheta - dt*C^T omega - dt*b_g), re-orthonormalized.
    Velocity: specific-force increment rotated to ECEF (with the half-interval
    Earth-rate correction), plus gravity and Coriolis. Position: trapezoidal.
    """
    c, v, p, f_avg = _nav_step(
        np.ascontiguousarray(state.C_be, dtype=float),
        np.ascontiguousarray(state.v_e, dtype=float),
        np.ascontiguousarray(state.p_e, dtype=float),
        np.ascontiguousarray(state.b_g, dtype=float),
        np.ascontiguousarray(state.b_a, dtype=float),
        np.ascontiguousarray(incr.dtheta1, dtype=float),
        np.ascontiguousarray(incr.dtheta2, dtype=float),
        np.ascontiguousarray(incr.dv1, dtype=float),
        np.ascontiguousarray(incr.dv2, dtype=float),
        float(incr.dt),
        model.rate_vector,
        model.semi_major_axis,
        model.e2,
        model.equatorial_gravity,
        model.somigliana_k,
    )
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(v)) and np.all(np.isfinite(p))):
        raise PropagationError(f"non-finite navigation state at t={state.t + incr.dt}")
    return (
        NavState(c, v, p, state.b_g.copy(), state.b_a.copy(), state.t + incr.dt),
        f_avg,
    )


def initialize(
    stationary: ImuStream,
    p0: GeodeticPosition,
    heading0: float,
    model: EarthModel = WGS84,
    min_duration: float = 1.0,
) -> NavState:
    """Coarse alignment from a stationary window.

    Roll/pitch are leveled from the mean specific force, yaw is the supplied
    heading, and the gyro bias is the mean rate minus the Earth rate mapped
    through the leveled attitude. Velocity and accel bias start at zero.
    """
    if len(stationary) < 2:
        raise InitializationError("stationary window is empty or too short")
    duration = stationary.t[-1] - stationary.t[0]
    if duration < min_duration:
        raise InitializationError(
            f"stationary window {duration:.2f} s shorter than {min_duration} s"
        )
    f_mean = stationary.accel.mean(axis=0)
    w_mean = stationary.gyro.mean(axis=0)
    g_norm = np.linalg.norm(f_mean)
    if g_norm < 1.0:
        raise InitializationError("mean specific force too small for leveling")
    pitch = np.arcsin(np.clip(f_mean[0] / g_norm, -1.0, 1.0))
    roll = np.arctan2(-f_mean[2], f_mean[1])
    c_bn = so3.matrix_from_rpy(roll, heading0, pitch)
    c_be = n_to_e_rotation(p0, model) @ c_bn
    b_g = w_mean - c_be.T @ model.rate_vector
    return NavState(
        C_be=c_be,
        v_e=np.zeros(3),
        p_e=geodetic_to_ecef(p0, model),
        b_g=b_g,
        b_a=np.zeros(3),
        t=float(stationary.t[-1]),
    )

"""Synthetic square-walk generator: truth states, IMU outputs, ranging.

The walk is built from raised-cosine swing segments (stride forward, arc in
height, pitch excursion), stationary stance segments, and 90-degree right
turns at the corners. The right foot repeats the left foot's schedule
delayed by half a gait cycle, starting half a stride to the right and half
a stride forward.

Truth positions accumulate in a single tangent-plane frame anchored at the
left foot's start (North-Up-East axes), so a lap closes exactly by
construction; geodetic coordinates come from the tangent-plane offset
transform. IMU outputs are derived from the exact kinematics of that model:
the gyro adds the Earth rate mapped to the body frame, and the
accelerometer output inverts the ECEF velocity dynamics at the true state
(local gravity vector, Coriolis), so that noise- and bias-free outputs
re-integrate to the truth up to mechanization truncation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .earth import (
    WGS84,
    EarthModel,
    GeodeticPosition,
    geodetic_to_ecef,
    gravity_magnitude,
    llh_from_ecef,
    n_to_e_rotation,
    tangent_offset_to_position,
)
from .fusion import RangeSample
from .strapdown import LEFT, RIGHT, ImuStream


@dataclass(frozen=True)
class GaitParams:
    """Walk geometry, timing, sensor errors and rates (see class docstring).

    Distances in meters, times in seconds, angles in radians, rates in Hz.
    Sensor noise fields are continuous densities except range_noise, which
    is a per-sample standard deviation.
    """

    stride: float = 1.3              # l_s
    max_height: float = 0.14         # l_h
    swing_time: float = 0.8          # t_u
    stance_time: float = 0.4         # t_s
    turn_time: float = 0.2           # t_r
    turn_pause: float = 0.0          # optional hold after each turn
    max_pitch: float = 0.55          # theta_max
    heading0: float = 0.0            # psi0, compass (North towards East)
    imu_rate: float = 100.0
    range_rate: float = 10.0
    side_strides: int = 25
    laps: int = 8
    lead_in: float = 0.0             # stationary hold before walking
    tail: float = 1.0                # stationary hold after walking
    origin: GeodeticPosition = field(
        default_factory=lambda: GeodeticPosition.from_degrees(31.0, 121.0, 0.0)
    )
    lever_left: tuple = (0.02, 0.05, -0.03)
    lever_right: tuple = (0.03, -0.03, 0.04)
    gyro_bias_left: tuple = (0.0, 0.0, 0.0)
    gyro_bias_right: tuple = (0.0, 0.0, 0.0)
    accel_bias_left: tuple = (0.0, 0.0, 0.0)
    accel_bias_right: tuple = (0.0, 0.0, 0.0)
    sigma_g: float = 0.0
    sigma_a: float = 0.0
    range_noise: float = 0.02
    bias_walk_g: float = 0.0
    bias_walk_a: float = 0.0

    def __post_init__(self):
        for name in ("stride", "swing_time", "stance_time", "turn_time",
                     "imu_rate", "range_rate"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        ratio = self.imu_rate / self.range_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("imu_rate must be an integer multiple of range_rate")
        dt = 1.0 / self.imu_rate
        for name in ("swing_time", "stance_time", "turn_time", "turn_pause",
                     "lead_in", "tail"):
            n = getattr(self, name) / dt
            if abs(n - round(n)) > 1e-6:
                raise ValueError(f"{name} must be a multiple of the IMU period")

    @property
    def cycle_time(self) -> float:
        return self.swing_time + self.stance_time

    @property
    def walk_duration(self) -> float:
        """Scheduled walking time of one foot (lead-in/tail/delay excluded)."""
        per_side = self.side_strides * self.cycle_time + self.turn_time + self.turn_pause
        return self.laps * 4 * per_side

    @property
    def total_distance(self) -> float:
        return self.laps * 4 * self.side_strides * self.stride


@dataclass
class TruthStream:
    """Per-sample truth for one foot (positions in the shared start frame)."""

    t: np.ndarray
    pos_n0: np.ndarray       # (N, 3) North-Up-East from the left-foot start
    vel_n0: np.ndarray       # (N, 3)
    acc_n0: np.ndarray       # (N, 3) analytic acceleration
    euler: np.ndarray        # (N, 3) roll, yaw, pitch
    euler_rates: np.ndarray  # (N, 3)
    stance: np.ndarray       # (N,) bool
    foot: str
    p_e: np.ndarray = None   # (N, 3) ECEF, filled by build_truth
    lat: np.ndarray = None
    lon: np.ndarray = None
    h: np.ndarray = None

    def __len__(self):
        return self.t.shape[0]


@dataclass
class RangeStream:
    t: np.ndarray
    d: np.ndarray

    def __len__(self):
        return self.t.shape[0]

    def samples(self, lever_left, lever_right) -> list[RangeSample]:
        ll = np.asarray(lever_left, dtype=float)
        lr = np.asarray(lever_right, dtype=float)
        return [RangeSample(float(t), float(d), ll, lr) for t, d in zip(self.t, self.d)]


@dataclass
class SimulationData:
    params: GaitParams
    truth_left: TruthStream
    truth_right: TruthStream
    imu_left: ImuStream
    imu_right: ImuStream
    ranges: RangeStream


def swing_kinematics(tau, p: GaitParams):
    """Raised-cosine swing profile at time-from-liftoff tau (vectorized).

    Returns (delta_p, v, pitch): displacement from the last stance anchor and
    velocity in North-Up-East at the current heading, plus the pitch angle.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < -1e-12) or np.any(tau > p.swing_time + 1e-12):
        raise ValueError("tau outside [0, swing_time]")
    cy, sy = np.cos(p.heading0), np.sin(p.heading0)
    phase = np.pi * tau / p.swing_time
    fwd = 0.5 * p.stride * (1.0 - np.cos(phase))
    up = 0.5 * p.max_height * (1.0 - np.cos(2.0 * phase))
    vf = 0.5 * p.stride * np.pi / p.swing_time * np.sin(phase)
    vu = p.max_height * np.pi / p.swing_time * np.sin(2.0 * phase)
    delta_p = np.stack(np.broadcast_arrays(fwd * cy, up, fwd * sy), axis=-1)
    v = np.stack(np.broadcast_arrays(vf * cy, vu, vf * sy), axis=-1)
    pitch = 0.5 * p.max_pitch * (1.0 - np.cos(2.0 * phase))
    return delta_p, v, pitch


def turn_kinematics(tau, turn_time: float, psi0: float):
    """Yaw during a 90-degree right turn; position fixed, velocity zero."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < -1e-12) or np.any(tau > turn_time + 1e-12):
        raise ValueError("tau outside [0, turn_time]")
    return np.pi * (1.0 - np.cos(np.pi * tau / turn_time)) / 4.0 + psi0


def right_foot_init(
    psi0: float, stride: float, left0: GeodeticPosition, model: EarthModel = WGS84
) -> GeodeticPosition:
    """Right-foot start: half stride to the right and half stride forward."""
    offset = right_foot_offset_n0(psi0, stride)
    return tangent_offset_to_position(offset, left0, model)


def right_foot_offset_n0(psi0: float, stride: float) -> np.ndarray:
    c, s = np.cos(psi0), np.sin(psi0)
    return 0.5 * stride * np.array([c + s, 0.0, c - s])


def _schedule(p: GaitParams, foot: str) -> list[tuple[str, int]]:
    """Segment list (kind, n_samples); right foot delayed by half a cycle."""

    def n_of(seconds):
        return int(round(seconds * p.imu_rate))

    delay = n_of(p.cycle_time / 2.0)
    segs = []
    lead = n_of(p.lead_in) + (delay if foot == RIGHT else 0)
    if lead:
        segs.append(("hold", lead))
    for _ in range(p.laps):
        for _ in range(4):
            for _ in range(p.side_strides):
                segs.append(("swing", n_of(p.swing_time)))
                segs.append(("stance", n_of(p.stance_time)))
            segs.append(("turn", n_of(p.turn_time)))
            if p.turn_pause > 0.0:
                segs.append(("hold", n_of(p.turn_pause)))
    tail = n_of(p.tail) + (delay if foot == LEFT else 0)
    segs.append(("hold", max(tail, 1)))
    return segs


def build_truth(p: GaitParams, foot: str, model: EarthModel = WGS84) -> TruthStream:
    """Exact truth trajectory of one foot on the IMU sample grid.

    Segments are evaluated on closed intervals and stitched by averaging the
    shared boundary sample. Position, velocity and angles are continuous so
    the averaging only matters for the acceleration, which jumps at swing
    boundaries: the two-sided mean is the band-limited sample value there,
    and it keeps the sampling bridge quadrature exact across the jump.
    """
    segs = _schedule(p, foot)
    n = sum(ns for _, ns in segs) + 1
    dt = 1.0 / p.imu_rate
    t = np.arange(n) * dt

    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    acc = np.zeros((n, 3))
    euler = np.zeros((n, 3))
    rates = np.zeros((n, 3))
    stance = np.zeros(n, dtype=bool)

    anchor = np.zeros(3) if foot == LEFT else right_foot_offset_n0(p.heading0, p.stride)
    psi = p.heading0
    i0 = 0
    first = True
    for kind, ns in segs:
        tau = np.arange(ns + 1) * dt  # closed interval, endpoint included
        s_pos = np.zeros((ns + 1, 3))
        s_vel = np.zeros((ns + 1, 3))
        s_acc = np.zeros((ns + 1, 3))
        s_euler = np.zeros((ns + 1, 3))
        s_rates = np.zeros((ns + 1, 3))
        if kind == "swing":
            local = replace(p, heading0=psi)
            dp, v, pitch = swing_kinematics(tau, local)
            s_pos[:] = anchor + dp
            s_vel[:] = v
            cy, sy = np.cos(psi), np.sin(psi)
            phase = np.pi * tau / p.swing_time
            af = 0.5 * p.stride * (np.pi / p.swing_time) ** 2 * np.cos(phase)
            au = 2.0 * p.max_height * (np.pi / p.swing_time) ** 2 * np.cos(2.0 * phase)
            s_acc[:, 0] = af * cy
            s_acc[:, 1] = au
            s_acc[:, 2] = af * sy
            s_euler[:, 1] = psi
            s_euler[:, 2] = pitch
            s_rates[:, 2] = p.max_pitch * np.pi / p.swing_time * np.sin(2.0 * phase)
            anchor = anchor + np.array(
                [p.stride * np.cos(psi), 0.0, p.stride * np.sin(psi)]
            )
        elif kind == "turn":
            s_pos[:] = anchor
            s_euler[:, 1] = turn_kinematics(tau, p.turn_time, psi)
            s_rates[:, 1] = (
                np.pi**2 / (4.0 * p.turn_time) * np.sin(np.pi * tau / p.turn_time)
            )
            psi += np.pi / 2.0
        else:  # stance or hold
            s_pos[:] = anchor
            s_euler[:, 1] = psi
            stance[i0 : i0 + ns + 1] = True

        sl = slice(i0 + (0 if first else 1), i0 + ns + 1)
        src = slice(0 if first else 1, ns + 1)
        for dst, s in (
            (pos, s_pos), (vel, s_vel), (acc, s_acc),
            (euler, s_euler), (rates, s_rates),
        ):
            dst[sl] = s[src]
        if not first:
            for dst, s in (
                (pos, s_pos), (vel, s_vel), (acc, s_acc),
                (euler, s_euler), (rates, s_rates),
            ):
                dst[i0] = 0.5 * (dst[i0] + s[0])
        first = False
        i0 += ns

    out = TruthStream(t, pos, vel, acc, euler, rates, stance, foot)
    c_ne = n_to_e_rotation(p.origin, model)
    out.p_e = geodetic_to_ecef(p.origin, model) + pos @ c_ne.T
    out.lat, out.lon, out.h = llh_from_ecef(out.p_e, model)
    return out


def _attitude_batch(euler: np.ndarray) -> np.ndarray:
    """C_b^n for (N, 3) roll/yaw/pitch rows (same convention as so3)."""
    cr, sr = np.cos(euler[:, 0]), np.sin(euler[:, 0])
    cy, sy = np.cos(euler[:, 1]), np.sin(euler[:, 1])
    cp, sp = np.cos(euler[:, 2]), np.sin(euler[:, 2])
    c = np.empty((euler.shape[0], 3, 3))
    c[:, 0, 0] = cy * cp
    c[:, 0, 1] = -cy * sp * cr - sy * sr
    c[:, 0, 2] = cy * sp * sr - sy * cr
    c[:, 1, 0] = sp
    c[:, 1, 1] = cp * cr
    c[:, 1, 2] = -cp * sr
    c[:, 2, 0] = sy * cp
    c[:, 2, 1] = -sy * sp * cr + cy * sr
    c[:, 2, 2] = sy * sp * sr + cy * cr
    return c


def _body_rates(euler: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Body angular rate wrt the tangent frame from Euler angles and rates."""
    roll, pitch = euler[:, 0], euler[:, 2]
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    w = np.empty_like(rates)
    w[:, 0] = rates[:, 0] - rates[:, 1] * sp
    w[:, 1] = rates[:, 2] * sr - rates[:, 1] * cp * cr
    w[:, 2] = rates[:, 2] * cr + rates[:, 1] * cp * sr
    return w


def body_to_ecef_batch(
    truth: TruthStream, p: GaitParams, model: EarthModel = WGS84
) -> np.ndarray:
    """True body-to-ECEF attitude per sample."""
    c_ne = n_to_e_rotation(p.origin, model)
    return np.einsum("ij,njk->nik", c_ne, _attitude_batch(truth.euler))


def synthesize_imu(
    truth: TruthStream,
    p: GaitParams,
    rng: np.random.Generator,
    model: EarthModel = WGS84,
) -> ImuStream:
    """IMU outputs consistent with the truth model (plus bias and noise)."""
    n = len(truth)
    c_ne = n_to_e_rotation(p.origin, model)
    c_be = body_to_ecef_batch(truth, p, model)
    omega = model.rate_vector

    w_nb = _body_rates(truth.euler, truth.euler_rates)
    gyro = w_nb + np.einsum("nji,j->ni", c_be, omega)

    v_e = truth.vel_n0 @ c_ne.T
    a_e = truth.acc_n0 @ c_ne.T
    gamma = gravity_magnitude(truth.lat, truth.h, model)
    up = np.stack(
        [np.cos(truth.lat) * np.cos(truth.lon),
         np.cos(truth.lat) * np.sin(truth.lon),
         np.sin(truth.lat)],
        axis=-1,
    )
    g_e = -gamma[:, None] * up
    f_e = a_e + 2.0 * np.cross(np.broadcast_to(omega, (n, 3)), v_e) - g_e
    accel = np.einsum("nji,nj->ni", c_be, f_e)

    bg = np.asarray(
        p.gyro_bias_left if truth.foot == LEFT else p.gyro_bias_right, dtype=float
    )
    ba = np.asarray(
        p.accel_bias_left if truth.foot == LEFT else p.accel_bias_right, dtype=float
    )
    dt = 1.0 / p.imu_rate
    gyro = gyro + bg
    accel = accel + ba
    if p.bias_walk_g > 0.0:
        gyro += np.cumsum(rng.standard_normal((n, 3)), axis=0) * (
            p.bias_walk_g * np.sqrt(dt)
        )
    if p.bias_walk_a > 0.0:
        accel += np.cumsum(rng.standard_normal((n, 3)), axis=0) * (
            p.bias_walk_a * np.sqrt(dt)
        )
    if p.sigma_g > 0.0:
        gyro = gyro + rng.standard_normal((n, 3)) * (p.sigma_g * np.sqrt(p.imu_rate))
    if p.sigma_a > 0.0:
        accel = accel + rng.standard_normal((n, 3)) * (p.sigma_a * np.sqrt(p.imu_rate))
    return ImuStream(truth.t.copy(), gyro, accel, truth.foot)


def synthesize_range(
    truth_left: TruthStream,
    truth_right: TruthStream,
    p: GaitParams,
    rng: np.random.Generator,
    model: EarthModel = WGS84,
) -> RangeStream:
    """Lever-to-lever distances on the range grid, plus measurement noise."""
    step = int(round(p.imu_rate / p.range_rate))
    idx = np.arange(0, min(len(truth_left), len(truth_right)), step)
    cl = body_to_ecef_batch(truth_left, p, model)[idx]
    cr = body_to_ecef_batch(truth_right, p, model)[idx]
    tip_l = truth_left.p_e[idx] + cl @ np.asarray(p.lever_left, dtype=float)
    tip_r = truth_right.p_e[idx] + cr @ np.asarray(p.lever_right, dtype=float)
    d = np.linalg.norm(tip_l - tip_r, axis=1)
    if p.range_noise > 0.0:
        d = d + p.range_noise * rng.standard_normal(len(idx))
    return RangeStream(truth_left.t[idx].copy(), d)


def build_square_walk(
    p: GaitParams,
    side_strides: int | None = None,
    laps: int | None = None,
    seed: int = 0,
    model: EarthModel = WGS84,
) -> SimulationData:
    """Full scenario: truth for both feet, IMU streams and range stream.

    Randomness is drawn in a fixed order from one seeded generator, so a
    given (params, seed) pair yields bit-identical streams.
    """
    if side_strides is not None or laps is not None:
        p = replace(
            p,
            side_strides=side_strides if side_strides is not None else p.side_strides,
            laps=laps if laps is not None else p.laps,
        )
    rng = np.random.default_rng(seed)
    truth_l = build_truth(p, LEFT, model)
    truth_r = build_truth(p, RIGHT, model)
    imu_l = synthesize_imu(truth_l, p, rng, model)
    imu_r = synthesize_imu(truth_r, p, rng, model)
    ranges = synthesize_range(truth_l, truth_r, p, rng, model)
    return SimulationData(p, truth_l, truth_r, imu_l, imu_r, ranges)

"""SO(3) utilities: exponential map, logarithm, right Jacobian, Euler angles.

Euler convention (used everywhere a roll/yaw/pitch triple appears): the
navigation frame is North-Up-East and the level body frame has x forward,
y up, z right. The attitude is composed yaw-then-pitch-then-roll,

    C_b^n = R_y(-yaw) @ R_z(pitch) @ R_x(roll),

so positive yaw is a compass heading (North towards East), positive pitch
raises the body x axis, and positive roll is about the forward axis.
"""

from __future__ import annotations

import numpy as np

from ._kernels import _right_jacobian, _rodrigues, _skew


def skew(v) -> np.ndarray:
    """Skew-symmetric matrix such that skew(v) @ w == cross(v, w)."""
    return _skew(np.ascontiguousarray(v, dtype=float))


def exp_map(phi) -> np.ndarray:
    """Rodrigues exponential of a rotation vector (series below 1e-7 rad)."""
    return _rodrigues(np.ascontiguousarray(phi, dtype=float))


def log_map(c) -> np.ndarray:
    """Rotation vector of a rotation matrix, canonical range [0, pi]."""
    c = np.asarray(c, dtype=float)
    trace = np.clip((np.trace(c) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(trace)
    if angle < 1e-8:
        return np.array([c[2, 1] - c[1, 2], c[0, 2] - c[2, 0], c[1, 0] - c[0, 1]]) / 2.0
    if np.pi - angle < 1e-6:
        # Near a half turn the axis comes from the symmetric part.
        m = (c + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diagonal(m), 0.0))
        k = int(np.argmax(axis))
        axis = m[:, k] / axis[k]
        axis /= np.linalg.norm(axis)
        # Fix the sign with the skew part (vanishes exactly at pi).
        v = np.array([c[2, 1] - c[1, 2], c[0, 2] - c[2, 0], c[1, 0] - c[0, 1]])
        if v @ axis < 0.0:
            axis = -axis
        return angle * axis
    v = np.array([c[2, 1] - c[1, 2], c[0, 2] - c[2, 0], c[1, 0] - c[0, 1]])
    return angle / (2.0 * np.sin(angle)) * v


def right_jacobian(phi) -> np.ndarray:
    """Right Jacobian of SO(3); maps additive tangent increments to the group."""
    return _right_jacobian(np.ascontiguousarray(phi, dtype=float))


def matrix_from_rpy(roll: float, yaw: float, pitch: float) -> np.ndarray:
    """Body-to-navigation rotation from (roll, yaw, pitch), N-U-E convention."""
    cr, sr = np.cos(roll), np.sin(roll)
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    # R_y(-yaw) @ R_z(pitch) @ R_x(roll), expanded.
    return np.array(
        [
            [cy * cp, -cy * sp * cr - sy * sr, cy * sp * sr - sy * cr],
            [sp, cp * cr, -cp * sr],
            [sy * cp, -sy * sp * cr + cy * sr, sy * sp * sr + cy * cr],
        ]
    )


def rpy_from_matrix(c_bn) -> tuple[float, float, float]:
    """Inverse of :func:`matrix_from_rpy`. Gimbal lock at pitch = +-pi/2."""
    c = np.asarray(c_bn, dtype=float)
    pitch = np.arcsin(np.clip(c[1, 0], -1.0, 1.0))
    yaw = np.arctan2(c[2, 0], c[0, 0])
    roll = np.arctan2(-c[1, 2], c[1, 1])
    return roll, yaw, pitch


def euler_rates_to_body(roll, pitch, roll_rate, yaw_rate, pitch_rate) -> np.ndarray:
    """Body angular rate from Euler angle rates (N-U-E convention).

    omega_b = roll_rate*e1 + pitch_rate*Rx' e3 - yaw_rate*Rx' Rz' e2; the
    yaw term enters with a minus because compass yaw is a rotation about -Up.
    """
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    # Rx(roll)^T e3 and Rx(roll)^T Rz(pitch)^T e2 expanded.
    e3_b = np.array([0.0, sr, cr])
    e2_b = np.array([sp, cp * cr, -cp * sr])
    return roll_rate * np.array([1.0, 0.0, 0.0]) + pitch_rate * e3_b - yaw_rate * e2_b

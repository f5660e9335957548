"""Constructive observability analysis from stance-to-stance constraints.

Each pair of stance epochs yields one linear constraint on the initial
biases and level-angle direction,

    alpha = [chi  gamma  eta] [b_a; b_g; x_theta],

built from raw (bias-uncorrupted) increments in the tangent frame, Earth
rotation ignored. Stacking constraints gives the batch system K X = y whose
column rank decides observability; the spectrum of K^T K exposes which
directions the walk has excited.

x_theta is the body-frame Up direction at the start epoch,
(sin(pitch), cos(pitch)cos(roll), -cos(pitch)sin(roll)), and couples in
through eta = -g*M*T*I3, so a level start recovers x_theta = (0, 1, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import so3
from ._kernels import _two_sample


@dataclass
class ConstraintRow:
    """One stance-to-stance constraint: alpha = chi b_a + gamma b_g + eta x_theta."""

    alpha: np.ndarray
    chi: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray
    n_intervals: int
    span: tuple[float, float]

    @property
    def k(self) -> np.ndarray:
        return np.hstack([self.chi, self.gamma, self.eta])


@dataclass
class ObservabilityBatch:
    rows: list[ConstraintRow]

    @property
    def K(self) -> np.ndarray:
        if not self.rows:
            raise ValueError("batch is empty")
        return np.vstack([r.k for r in self.rows])

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([r.alpha for r in self.rows])


@dataclass
class BatchSolution:
    """Least-squares result; x is None when K is numerically rank deficient."""

    x: np.ndarray | None
    rank: int
    singular_values: np.ndarray
    null_space: np.ndarray | None
    residual: float

    @property
    def full_rank(self) -> bool:
        return self.x is not None

    @property
    def accel_bias(self) -> np.ndarray:
        return self.x[0:3]

    @property
    def gyro_bias(self) -> np.ndarray:
        return self.x[3:6]

    @property
    def x_theta(self) -> np.ndarray:
        return self.x[6:9]


def accumulate_row(
    dtheta1: np.ndarray,
    dtheta2: np.ndarray,
    dv1: np.ndarray,
    dv2: np.ndarray,
    dt: float,
    gravity: float,
    span: tuple[float, float] = (0.0, 0.0),
) -> ConstraintRow:
    """Build one constraint from M raw two-sample increment pairs.

    Arguments are (M, 3) half-interval increments between two stance epochs
    and the common update interval dt. The attitude chain is integrated from
    the raw rotation increments; chi and gamma carry the first-order bias
    sensitivities of the velocity integral, eta = -gravity * M * dt * I3.
    """
    dtheta1 = np.asarray(dtheta1, dtype=float)
    m = dtheta1.shape[0]
    if m < 1:
        raise ValueError("empty stance-to-stance interval")
    dtheta2 = np.asarray(dtheta2, dtype=float)
    dv1 = np.asarray(dv1, dtype=float)
    dv2 = np.asarray(dv2, dtype=float)

    alpha = np.zeros(3)
    chi = np.zeros((3, 3))
    gamma = np.zeros((3, 3))
    chain = np.eye(3)          # body(t_k) -> body(t_0), raw-gyro integrated
    jr_accum = np.zeros((3, 3))  # sum of chain_{i+1} J_r(dtheta_i)
    eye = np.eye(3)
    for k in range(m):
        dth = dtheta1[k] + dtheta2[k]
        _, dv = _two_sample(
            np.ascontiguousarray(dtheta1[k]),
            np.ascontiguousarray(dtheta2[k]),
            np.ascontiguousarray(dv1[k]),
            np.ascontiguousarray(dv2[k]),
        )
        cdv = chain @ dv
        alpha -= cdv
        chi -= dt * chain @ (eye + so3.skew(5.0 * dtheta1[k] + dtheta2[k]) / 6.0)
        gamma += dt * so3.skew(cdv) @ jr_accum
        gamma += (dt / 6.0) * chain @ so3.skew(dv1[k] + 5.0 * dv2[k])
        chain = chain @ so3.exp_map(dth)
        jr_accum += chain @ so3.right_jacobian(dth)
    eta = -gravity * m * dt * np.eye(3)
    return ConstraintRow(alpha, chi, gamma, eta, m, span)


def solve_batch(
    batch: ObservabilityBatch,
    rank_tol: float = 1e-8,
    refine_direction: bool = True,
) -> BatchSolution:
    """Rank-revealing least squares of the stacked constraint system.

    Singular values below rank_tol times the largest count as zero; a rank
    below nine returns the null-space basis instead of an estimate.

    The gravity-direction block is a unit vector by construction (two angles
    parameterize three components). The plain 9-parameter solve leaves its
    norm free, which is nearly degenerate with the Up-axis accelerometer
    bias; with refine_direction the direction from the first pass is
    normalized and held fixed while the six bias parameters are re-solved.
    """
    k = batch.K
    if k.shape[0] < 9:
        raise ValueError("need at least 3 constraint rows (9 equations)")
    y = batch.y
    u, s, vt = np.linalg.svd(k, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0]))
    if rank < 9:
        return BatchSolution(None, rank, s, vt[rank:].T, float("nan"))
    x = vt.T @ ((u.T @ y) / s)
    if refine_direction and np.linalg.norm(x[6:9]) > 1e-12:
        direction = x[6:9] / np.linalg.norm(x[6:9])
        biases, *_ = np.linalg.lstsq(k[:, 0:6], y - k[:, 6:9] @ direction, rcond=None)
        x = np.concatenate([biases, direction])
    residual = float(np.linalg.norm(k @ x - y))
    return BatchSolution(x, rank, s, None, residual)


def eigen_spectrum(batch: ObservabilityBatch) -> np.ndarray:
    """Eigenvalues of K^T K, ascending."""
    k = batch.K
    return np.linalg.eigvalsh(k.T @ k)


def level_angles_from_direction(x_theta: np.ndarray) -> tuple[float, float]:
    """Recover (roll, pitch) from the body-frame Up direction.

    x_theta = (sin(pitch), cos(pitch)cos(roll), -cos(pitch)sin(roll)).
    """
    x = np.asarray(x_theta, dtype=float)
    pitch = float(np.arcsin(np.clip(x[0] / max(np.linalg.norm(x), 1e-12), -1.0, 1.0)))
    roll = float(np.arctan2(-x[2], x[1]))
    return roll, pitch


def mid_stance_epochs(stance_flags: np.ndarray) -> np.ndarray:
    """Indices (raw samples) of stance-run midpoints, for row anchoring."""
    flags = np.asarray(stance_flags, dtype=bool)
    mids = []
    n = len(flags)
    i = 0
    while i < n:
        if flags[i]:
            j = i
            while j < n and flags[j]:
                j += 1
            mids.append((i + j - 1) // 2)
            i = j
        else:
            i += 1
    return np.asarray(mids, dtype=int)

"""Numerically hot kernels shared by the strapdown and fusion modules.

Every function here is written against plain float64 ndarrays so that the
same source runs either JIT-compiled through numba or as ordinary numpy.
The backend is selected once at import time from the ``FOOTNAV_BACKEND``
environment variable:

* ``auto`` (default) - use numba when importable, else pure numpy,
* ``numba``          - require numba, fail loudly if missing,
* ``numpy``          - force the pure-numpy path.

``benchmarks/bench_backends.py`` compares the two paths on the full filter.
"""

import os

import numpy as np

_BACKEND = os.environ.get("FOOTNAV_BACKEND", "auto").strip().lower() or "auto"
if _BACKEND not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"FOOTNAV_BACKEND must be 'auto', 'numba' or 'numpy', got {_BACKEND!r}"
    )

if _BACKEND == "numpy":
    JIT_ENABLED = False
elif _BACKEND == "numba":
    from numba import njit  # noqa: F401  (import failure is the intended error)

    JIT_ENABLED = True
else:
    try:
        from numba import njit

        JIT_ENABLED = True
    except ImportError:
        JIT_ENABLED = False


def kernel(fn):
    """Apply @njit when the numba backend is active, else return fn as-is."""
    if JIT_ENABLED:
        return njit(cache=True)(fn)
    return fn


@kernel
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@kernel
def _skew(v):
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@kernel
def _rodrigues(phi):
    # Closed form; 4th-order series below 1e-7 rad where sin(x)/x degrades.
    a2 = phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2]
    s = _skew(phi)
    s2 = s @ s
    if a2 < 1e-14:
        return np.eye(3) + s + 0.5 * s2 + (s @ s2) / 6.0 + (s2 @ s2) / 24.0
    a = np.sqrt(a2)
    return np.eye(3) + (np.sin(a) / a) * s + ((1.0 - np.cos(a)) / a2) * s2


@kernel
def _right_jacobian(phi):
    # J_r(phi) = I - (1-cos a)/a^2 S + (a - sin a)/a^3 S^2; series below 1e-5.
    a2 = phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2]
    s = _skew(phi)
    s2 = s @ s
    if a2 < 1e-10:
        return np.eye(3) - 0.5 * s + s2 / 6.0
    a = np.sqrt(a2)
    return np.eye(3) - ((1.0 - np.cos(a)) / a2) * s + ((a - np.sin(a)) / (a2 * a)) * s2


@kernel
def _orthonormalize(c):
    # One symmetric correction step; keeps C in SO(3) over long runs.
    e = c.T @ c
    return c @ (1.5 * np.eye(3) - 0.5 * e)


@kernel
def _lat_lon_h(p, a, e2):
    """Fixed-point geodetic latitude iteration. Returns (lat, lon, h, err)."""
    x = p[0]
    y = p[1]
    z = p[2]
    r = np.sqrt(x * x + y * y)
    lon = np.arctan2(y, x)
    lat = np.arctan2(z, r * (1.0 - e2))
    err = 1.0
    for _ in range(10):
        s = np.sin(lat)
        rn = a / np.sqrt(1.0 - e2 * s * s)
        new = np.arctan2(z + e2 * rn * s, r)
        err = abs(new - lat)
        lat = new
        if err < 1e-14:
            break
    s = np.sin(lat)
    c = np.cos(lat)
    rn = a / np.sqrt(1.0 - e2 * s * s)
    if abs(c) > 0.1:
        h = r / c - rn
    else:
        h = z / s - rn * (1.0 - e2)
    return lat, lon, h, err


@kernel
def _gravity_ecef(p, a, e2, ge, gk):
    # Somigliana magnitude with linear height correction, along -Up.
    lat, lon, h, _ = _lat_lon_h(p, a, e2)
    s = np.sin(lat)
    s2 = s * s
    gamma = ge * (1.0 + gk * s2) / np.sqrt(1.0 - e2 * s2) * (1.0 - 2.0 * h / a)
    cl = np.cos(lat)
    out = np.empty(3)
    out[0] = -gamma * cl * np.cos(lon)
    out[1] = -gamma * cl * np.sin(lon)
    out[2] = -gamma * s
    return out


@kernel
def _two_sample(dth1, dth2, dv1, dv2):
    dth = dth1 + dth2
    dvsum = dv1 + dv2
    dv = (
        dvsum
        + 0.5 * _cross(dth, dvsum)
        + (2.0 / 3.0) * (_cross(dth1, dv2) + _cross(dv1, dth2))
    )
    return dth, dv


_GL5_NODES = np.array(
    [
        0.5 * (1.0 - 0.906179845938664),
        0.5 * (1.0 - 0.5384693101056831),
        0.5,
        0.5 * (1.0 + 0.5384693101056831),
        0.5 * (1.0 + 0.906179845938664),
    ]
)
_GL5_WEIGHTS = 0.5 * np.array(
    [
        0.23692688505618908,
        0.47862867049936647,
        0.5688888888888889,
        0.47862867049936647,
        0.23692688505618908,
    ]
)


@kernel
def _rotated_force_integral(dth1, dth2, dv1, dv2, dt):
    """Integral of C_b(t)^b(t0) f(t) over one update interval.

    Reconstructs linear rate/force profiles from the half increments (the
    model behind the two-sample scheme) and integrates exp(theta x) f by
    5-point Gauss-Legendre with exact per-node Rodrigues rotations. The
    first-order two-sample form leaves a phase-locked residual under the
    combined pitch and specific-force oscillation of walking; this keeps
    all rotation orders of the fitted profile instead.
    """
    aw = 4.0 * (dth2 - dth1) / (dt * dt)
    bw = (3.0 * dth1 - dth2) / dt
    af = 4.0 * (dv2 - dv1) / (dt * dt)
    bf = (3.0 * dv1 - dv2) / dt
    out = np.zeros(3)
    for i in range(5):
        x = _GL5_NODES[i] * dt
        theta = 0.5 * aw * x * x + bw * x
        f = af * x + bf
        out += (_GL5_WEIGHTS[i] * dt) * (_rodrigues(theta) @ f)
    return out


@kernel
def _nav_step(c, v, p, bg, ba, dth1, dth2, dv1, dv2, dt, om, a, e2, ge, gk):
    """One strapdown update over dt from two half-interval increments.

    Biases are removed from the half increments before the profile
    reconstruction, so the rotation compensation of the velocity integral is
    free of the gyro-bias cross term (the first-order equivalent of removing
    it afterwards). Returns (C', v', p', f_avg) with f_avg the mean
    bias-corrected specific force in the starting body frame (used to
    assemble the error-state F).
    """
    h = 0.5 * dt
    dth1_c = dth1 - h * bg
    dth2_c = dth2 - h * bg
    dv1_c = dv1 - h * ba
    dv2_c = dv2 - h * ba
    dv_c = _rotated_force_integral(dth1_c, dth2_c, dv1_c, dv2_c, dt)

    phi = dth1_c + dth2_c - dt * (c.T @ om)
    c_new = _orthonormalize(c @ _rodrigues(phi))

    u = c @ dv_c
    u = u - _cross(0.5 * dt * om, u)  # e-frame rotation over the interval

    g = _gravity_ecef(p, a, e2, ge, gk)
    v_new = v + u + dt * (g - 2.0 * _cross(om, v))
    p_new = p + 0.5 * dt * (v + v_new)
    f_avg = dv_c / dt
    return c_new, v_new, p_new, f_avg


@kernel
def _joint_transition(cs, fs, om, dt):
    """Phi = I + F dt for the 30-state dual-foot error model.

    cs: (2,3,3) body-to-ECEF attitudes, fs: (2,3) mean specific forces.
    """
    phi = np.eye(30)
    omx = _skew(om)
    for foot in range(2):
        o = 15 * foot
        c = cs[foot]
        fe = c @ fs[foot]
        fex = _skew(fe)
        for i in range(3):
            for j in range(3):
                phi[o + i, o + j] -= dt * omx[i, j]
                phi[o + i, o + 9 + j] = -dt * c[i, j]
                phi[o + 3 + i, o + j] = dt * fex[i, j]
                phi[o + 3 + i, o + 3 + j] -= 2.0 * dt * omx[i, j]
                phi[o + 3 + i, o + 12 + j] = dt * c[i, j]
            phi[o + 6 + i, o + 3 + i] = dt
    return phi


@kernel
def _predict_cov(pmat, phi, qdiag):
    out = phi @ pmat @ phi.T
    for i in range(out.shape[0]):
        out[i, i] += qdiag[i]
    return 0.5 * (out + out.T)


@kernel
def _kalman_update(pmat, h, r, z):
    """Joseph-form update. Returns (dx, P', mahalanobis^2)."""
    s = h @ pmat @ h.T + r
    pht = pmat @ h.T
    k = np.linalg.solve(s, pht.T).T
    maha = z @ np.linalg.solve(s, z)
    dx = k @ z
    a = np.eye(pmat.shape[0]) - k @ h
    out = a @ pmat @ a.T + k @ r @ k.T
    return dx, 0.5 * (out + out.T), maha

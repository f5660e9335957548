"""WGS-84 Earth model: frames, conversions and normal gravity.

Conventions used throughout the package:

* ECEF (e-frame): x through the Greenwich meridian at the equator,
  z along the polar axis, so the Earth rate is ``[0, 0, omega]``.
* Navigation frame (n-frame): local level, ordered North-Up-East.
  ``n_to_e_rotation`` returns the matrix whose columns are the ECEF
  directions of North, Up and East.

Scalar entry points take/return :class:`GeodeticPosition`; the ``*_array``
variants operate on stacked rows for bulk conversions.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from ._kernels import _gravity_ecef, _lat_lon_h


@dataclass(frozen=True)
class EarthModel:
    """Reference ellipsoid constants (WGS-84 defaults).

    Attributes
    ----------
    semi_major_axis : float
        Equatorial radius a in meters.
    eccentricity : float
        First eccentricity e (not squared).
    rotation_rate : float
        Earth rotation rate in rad/s.
    equatorial_gravity, polar_gravity : float
        Normal gravity at the equator / pole for the Somigliana formula.
    """

    semi_major_axis: float = 6378137.0
    eccentricity: float = 0.0818191908426215
    rotation_rate: float = 7.292115e-5
    equatorial_gravity: float = 9.7803253359
    polar_gravity: float = 9.8321849378

    def __post_init__(self):
        if self.semi_major_axis <= 0.0:
            raise ValueError("semi_major_axis must be positive")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError("eccentricity must be in [0, 1)")
        if self.rotation_rate <= 0.0:
            raise ValueError("rotation_rate must be positive")

    @property
    def e2(self) -> float:
        return self.eccentricity**2

    @property
    def semi_minor_axis(self) -> float:
        return self.semi_major_axis * np.sqrt(1.0 - self.e2)

    @property
    def somigliana_k(self) -> float:
        a, b = self.semi_major_axis, self.semi_minor_axis
        return (b * self.polar_gravity) / (a * self.equatorial_gravity) - 1.0

    @property
    def rate_vector(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.rotation_rate])


WGS84 = EarthModel()


@dataclass(frozen=True)
class GeodeticPosition:
    """Geodetic coordinates: latitude/longitude in radians, height in meters.

    Longitude is wrapped to (-pi, pi] on construction.
    """

    latitude: float
    longitude: float
    height: float = 0.0

    def __post_init__(self):
        if not abs(self.latitude) <= pi / 2:
            raise ValueError(f"latitude {self.latitude} outside [-pi/2, pi/2]")
        lon = float(self.longitude)
        if not (-pi < lon <= pi):
            lon = lon - 2.0 * pi * np.floor((lon + pi) / (2.0 * pi))
            if lon <= -pi:
                lon += 2.0 * pi
            object.__setattr__(self, "longitude", lon)

    @classmethod
    def from_degrees(cls, lat_deg, lon_deg, height=0.0):
        return cls(np.deg2rad(lat_deg), np.deg2rad(lon_deg), height)


def validate_ecef(p: np.ndarray, model: EarthModel = WGS84) -> np.ndarray:
    """Check that p is a finite position on or near the Earth surface."""
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise ValueError("ECEF position must be a finite 3-vector")
    r = float(np.linalg.norm(p))
    if not model.semi_minor_axis - 12e3 <= r <= model.semi_major_axis + 12e3:
        raise ValueError(f"ECEF radius {r:.1f} m is not near the Earth surface")
    return p


def geodetic_to_ecef(g: GeodeticPosition, model: EarthModel = WGS84) -> np.ndarray:
    """Closed-form geodetic to ECEF conversion."""
    return ecef_from_llh(g.latitude, g.longitude, g.height, model)


def ecef_from_llh(lat, lon, h, model: EarthModel = WGS84) -> np.ndarray:
    """Vectorized geodetic to ECEF; scalars map to shape (3,), arrays to (..., 3)."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    h = np.asarray(h, dtype=float)
    s, c = np.sin(lat), np.cos(lat)
    rn = model.semi_major_axis / np.sqrt(1.0 - model.e2 * s * s)
    x = (rn + h) * c * np.cos(lon)
    y = (rn + h) * c * np.sin(lon)
    z = (rn * (1.0 - model.e2) + h) * s
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def ecef_to_geodetic(p, model: EarthModel = WGS84) -> GeodeticPosition:
    """Iterative ECEF to geodetic conversion (tolerance 1e-12 rad, <= 10 iters).

    Raises
    ------
    ValueError
        For degenerate input near the ellipsoid center or if the latitude
        iteration fails to converge.
    """
    p = np.asarray(p, dtype=float)
    if np.linalg.norm(p) < model.semi_minor_axis / 2.0:
        raise ValueError("ECEF position too close to the Earth center")
    lat, lon, h, err = _lat_lon_h(p, model.semi_major_axis, model.e2)
    if not err < 1e-13:
        raise ValueError("geodetic latitude iteration did not converge")
    return GeodeticPosition(lat, lon, h)


def llh_from_ecef(p, model: EarthModel = WGS84):
    """Vectorized ECEF to geodetic over (..., 3). Returns (lat, lon, h) arrays."""
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r = np.hypot(x, y)
    lon = np.arctan2(y, x)
    lat = np.arctan2(z, r * (1.0 - model.e2))
    for _ in range(10):
        s = np.sin(lat)
        rn = model.semi_major_axis / np.sqrt(1.0 - model.e2 * s * s)
        new = np.arctan2(z + model.e2 * rn * s, r)
        err = np.max(np.abs(new - lat)) if new.size else 0.0
        lat = new
        if err < 1e-14:
            break
    s, c = np.sin(lat), np.cos(lat)
    rn = model.semi_major_axis / np.sqrt(1.0 - model.e2 * s * s)
    near_pole = np.abs(c) <= 0.1
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(
            near_pole,
            z / np.where(s == 0.0, 1.0, s) - rn * (1.0 - model.e2),
            r / np.where(np.abs(c) <= 0.1, 1.0, c) - rn,
        )
    return lat, lon, h


def n_to_e_rotation(g: GeodeticPosition, model: EarthModel = WGS84) -> np.ndarray:
    """Rotation from the local North-Up-East frame to ECEF (columns N, U, E)."""
    return n_to_e_rotation_from_ll(g.latitude, g.longitude)


def n_to_e_rotation_from_ll(lat, lon) -> np.ndarray:
    """Vectorized n->e rotation; scalars give (3, 3), arrays (..., 3, 3)."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    sl, cl = np.sin(lat), np.cos(lat)
    so, co = np.sin(lon), np.cos(lon)
    zero = np.zeros_like(sl * so)
    north = np.stack([-sl * co, -sl * so, cl + zero], axis=-1)
    up = np.stack([cl * co, cl * so, sl + zero], axis=-1)
    east = np.stack([-so + zero, co + zero, zero], axis=-1)
    return np.stack([north, up, east], axis=-1)


def gravity_magnitude(lat, h, model: EarthModel = WGS84):
    """Somigliana normal gravity with linear height correction (vectorized)."""
    s2 = np.sin(np.asarray(lat, dtype=float)) ** 2
    g0 = (
        model.equatorial_gravity
        * (1.0 + model.somigliana_k * s2)
        / np.sqrt(1.0 - model.e2 * s2)
    )
    return g0 * (1.0 - 2.0 * np.asarray(h, dtype=float) / model.semi_major_axis)


def gravity_ecef(p, model: EarthModel = WGS84) -> np.ndarray:
    """Normal gravity vector in ECEF at a near-surface position.

    Includes the centrifugal contribution by construction (normal gravity),
    so the velocity dynamics use it together with the Coriolis term only.
    """
    p = np.ascontiguousarray(p, dtype=float)
    return _gravity_ecef(
        p,
        model.semi_major_axis,
        model.e2,
        model.equatorial_gravity,
        model.somigliana_k,
    )


def tangent_offset_to_position(
    delta_p, anchor: GeodeticPosition, model: EarthModel = WGS84
) -> GeodeticPosition:
    """Apply a local-level N-U-E offset to an anchor position.

    Rotates ``delta_p`` into ECEF on the anchor's tangent frame, adds it to
    the anchor ECEF position and converts back to geodetic coordinates.
    """
    delta_p = np.asarray(delta_p, dtype=float)
    if np.linalg.norm(delta_p) >= 100e3:
        raise ValueError("tangent-plane offset only valid well below 100 km")
    p = geodetic_to_ecef(anchor, model) + n_to_e_rotation(anchor, model) @ delta_p
    return ecef_to_geodetic(p, model)

"""Log-file formats: CSV streams, trajectory output, GeoJSON export.

All files are UTF-8 CSV with one header line. Floats are written with
%.17g so that a write/parse round trip reproduces the exact float64 bits;
angles are stored in radians for the same reason.

    imu.csv:   t,foot,gx,gy,gz,ax,ay,az     (rad/s and m/s^2, foot L or R)
    range.csv: t,d                          (meters)
    truth.csv / traj_*.csv:
               t,foot,lat,lon,height,vn,vu,ve,roll,yaw,pitch,stance
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gaitsim import RangeStream, TruthStream
from .strapdown import LEFT, RIGHT, ImuStream

FMT = "%.17g"

IMU_HEADER = "t,foot,gx,gy,gz,ax,ay,az"
RANGE_HEADER = "t,d"
TRAJ_HEADER = "t,foot,lat,lon,height,vn,vu,ve,roll,yaw,pitch,stance"


class DataError(RuntimeError):
    """Malformed or inconsistent input data."""


@dataclass
class TruthTable:
    """Per-foot truth columns needed for error summaries."""

    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    h: np.ndarray
    vel: np.ndarray
    euler: np.ndarray
    stance: np.ndarray
    foot: str

    @classmethod
    def from_stream(cls, truth: TruthStream) -> "TruthTable":
        return cls(
            truth.t,
            truth.lat,
            truth.lon,
            truth.h,
            truth.vel_n0,
            truth.euler,
            truth.stance.astype(bool),
            truth.foot,
        )


def _fmt_row(values) -> str:
    return ",".join(FMT % v for v in values)


def write_imu_csv(path, left: ImuStream, right: ImuStream) -> None:
    """Interleave both feet by timestamp (stable within equal stamps)."""
    rows = []
    for stream in (left, right):
        for i in range(len(stream)):
            rows.append((stream.t[i], stream.foot, stream.gyro[i], stream.accel[i]))
    rows.sort(key=lambda r: r[0])
    with open(path, "w", encoding="utf-8") as f:
        f.write(IMU_HEADER + "\n")
        for t, foot, g, a in rows:
            f.write(
                FMT % t + f",{foot}," + _fmt_row(g) + "," + _fmt_row(a) + "\n"
            )


def _parse_float(tok: str, path, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise DataError(f"{path}:{lineno}: bad {what} value {tok!r}") from None
    if not np.isfinite(v):
        raise DataError(f"{path}:{lineno}: non-finite {what}")
    return v


def read_imu_csv(path) -> tuple[ImuStream, ImuStream]:
    """Parse an IMU log; enforces per-foot strictly increasing timestamps."""
    cols: dict[str, list] = {LEFT: [], RIGHT: []}
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != IMU_HEADER:
            raise DataError(f"{path}:1: expected header {IMU_HEADER!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            tok = line.split(",")
            if len(tok) != 8:
                raise DataError(f"{path}:{lineno}: expected 8 fields, got {len(tok)}")
            foot = tok[1]
            if foot not in (LEFT, RIGHT):
                raise DataError(f"{path}:{lineno}: unknown foot tag {foot!r}")
            t = _parse_float(tok[0], path, lineno, "timestamp")
            vals = [_parse_float(tok[i], path, lineno, "sample") for i in range(2, 8)]
            rows = cols[foot]
            if rows and t <= rows[-1][0]:
                raise DataError(
                    f"{path}:{lineno}: timestamp {t!r} out of order (foot {foot})"
                )
            rows.append((t, vals))
    streams = []
    for foot in (LEFT, RIGHT):
        rows = cols[foot]
        if not rows:
            raise DataError(f"{path}: no samples for foot {foot}")
        t = np.array([r[0] for r in rows])
        data = np.array([r[1] for r in rows])
        streams.append(ImuStream(t, data[:, 0:3], data[:, 3:6], foot))
    return streams[0], streams[1]


def write_range_csv(path, ranges: RangeStream) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(RANGE_HEADER + "\n")
        for t, d in zip(ranges.t, ranges.d):
            f.write(FMT % t + "," + FMT % d + "\n")


def read_range_csv(path) -> RangeStream:
    path = Path(path)
    ts, ds = [], []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != RANGE_HEADER:
            raise DataError(f"{path}:1: expected header {RANGE_HEADER!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            tok = line.split(",")
            if len(tok) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(tok)}")
            t = _parse_float(tok[0], path, lineno, "timestamp")
            d = _parse_float(tok[1], path, lineno, "range")
            if ts and t <= ts[-1]:
                raise DataError(f"{path}:{lineno}: timestamp {t!r} out of order")
            if d <= 0.0:
                raise DataError(f"{path}:{lineno}: non-positive range {d!r}")
            ts.append(t)
            ds.append(d)
    if not ts:
        raise DataError(f"{path}: no samples")
    return RangeStream(np.array(ts), np.array(ds))


def write_trajectory_csv(path, tables: list[TruthTable]) -> None:
    rows = []
    for tab in tables:
        for i in range(len(tab.t)):
            rows.append((tab.t[i], tab.foot, i, tab))
    rows.sort(key=lambda r: r[0])
    with open(path, "w", encoding="utf-8") as f:
        f.write(TRAJ_HEADER + "\n")
        for t, foot, i, tab in rows:
            vals = [
                tab.t[i], tab.lat[i], tab.lon[i], tab.h[i],
                tab.vel[i, 0], tab.vel[i, 1], tab.vel[i, 2],
                tab.euler[i, 0], tab.euler[i, 1], tab.euler[i, 2],
            ]
            f.write(
                FMT % vals[0]
                + f",{foot},"
                + _fmt_row(vals[1:])
                + f",{int(tab.stance[i])}\n"
            )


def read_trajectory_csv(path) -> dict[str, TruthTable]:
    path = Path(path)
    cols: dict[str, list] = {LEFT: [], RIGHT: []}
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != TRAJ_HEADER:
            raise DataError(f"{path}:1: expected header {TRAJ_HEADER!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            tok = line.split(",")
            if len(tok) != 12:
                raise DataError(f"{path}:{lineno}: expected 12 fields, got {len(tok)}")
            foot = tok[1]
            if foot not in (LEFT, RIGHT):
                raise DataError(f"{path}:{lineno}: unknown foot tag {foot!r}")
            t = _parse_float(tok[0], path, lineno, "timestamp")
            vals = [_parse_float(tok[i], path, lineno, "field") for i in range(2, 11)]
            if tok[11] not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: stance flag must be 0 or 1")
            rows = cols[foot]
            if rows and t <= rows[-1][0]:
                raise DataError(
                    f"{path}:{lineno}: timestamp {t!r} out of order (foot {foot})"
                )
            rows.append((t, vals, tok[11] == "1"))
    out = {}
    for foot in (LEFT, RIGHT):
        rows = cols[foot]
        if not rows:
            raise DataError(f"{path}: no samples for foot {foot}")
        t = np.array([r[0] for r in rows])
        v = np.array([r[1] for r in rows])
        stance = np.array([r[2] for r in rows], dtype=bool)
        out[foot] = TruthTable(
            t, v[:, 0], v[:, 1], v[:, 2], v[:, 3:6], v[:, 6:9], stance, foot
        )
    return out


def write_geojson(path, tables: list[TruthTable], properties=None, stride=10) -> None:
    """One LineString per foot, coordinates in [lon_deg, lat_deg]."""
    features = []
    for tab in tables:
        coords = np.stack(
            [np.rad2deg(tab.lon[::stride]), np.rad2deg(tab.lat[::stride])], axis=-1
        )
        props = {"foot": tab.foot}
        if properties:
            props.update(properties)
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": coords.tolist(),
                },
                "properties": props,
            }
        )
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"type": "FeatureCollection", "features": features}, f)
        f.write("\n")


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")

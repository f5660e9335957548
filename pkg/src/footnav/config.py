"""JSON run-configuration parsing.

The gait block keeps the conventional parameter names (l_s, l_h, t_u, t_s,
t_r, t_o, theta_max, ...); angles in config files are degrees for
readability, converted to radians here. See README for the full schema.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .detect import DetectorConfig
from .earth import GeodeticPosition
from .fusion import NoiseConfig
from .gaitsim import GaitParams
from .pipeline import (
    ConfigError,
    FilterConfig,
    InitialUncertainty,
    InitSpec,
    RunConfig,
)

_GAIT_KEYS = {
    "l_s": "stride",
    "l_h": "max_height",
    "t_u": "swing_time",
    "t_s": "stance_time",
    "t_r": "turn_time",
    "t_o": "turn_pause",
    "theta_max": "max_pitch",
    "imu_rate": "imu_rate",
    "range_rate": "range_rate",
    "side_strides": "side_strides",
    "laps": "laps",
    "lead_in": "lead_in",
    "tail": "tail",
    "sigma_g": "sigma_g",
    "sigma_a": "sigma_a",
    "range_noise": "range_noise",
    "bias_walk_g": "bias_walk_g",
    "bias_walk_a": "bias_walk_a",
}


def _vec3(block, key, scale=1.0, default=None):
    if key not in block:
        if default is None:
            raise ConfigError(f"missing config field {key!r}")
        return default
    v = block[key]
    if not (isinstance(v, (list, tuple)) and len(v) == 3):
        raise ConfigError(f"{key} must be a 3-element list")
    return tuple(float(x) * scale for x in v)


def _gait_from_dict(block: dict, levers: dict) -> GaitParams:
    kwargs = {}
    for key, field in _GAIT_KEYS.items():
        if key in block:
            kwargs[field] = block[key]
    if "psi0_deg" in block:
        kwargs["heading0"] = float(np.deg2rad(block["psi0_deg"]))
    if "origin_deg" in block:
        o = block["origin_deg"]
        if not (isinstance(o, (list, tuple)) and len(o) == 3):
            raise ConfigError("origin_deg must be [lat_deg, lon_deg, height_m]")
        kwargs["origin"] = GeodeticPosition.from_degrees(o[0], o[1], o[2])
    for side in ("left", "right"):
        if f"gyro_bias_{side}_dps" in block:
            kwargs[f"gyro_bias_{side}"] = _vec3(
                block, f"gyro_bias_{side}_dps", scale=np.pi / 180.0
            )
        if f"accel_bias_{side}" in block:
            kwargs[f"accel_bias_{side}"] = _vec3(block, f"accel_bias_{side}")
    kwargs["lever_left"] = levers.get("left", GaitParams.lever_left)
    kwargs["lever_right"] = levers.get("right", GaitParams.lever_right)
    try:
        return GaitParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid gait block: {exc}") from exc


def _filter_from_dict(block: dict) -> FilterConfig:
    noise_kwargs = {
        k: float(block[k])
        for k in ("sigma_g", "sigma_a", "sigma_bg", "sigma_ba",
                  "sigma_v", "sigma_d", "sigma_ec")
        if k in block
    }
    det_block = block.get("detector", {})
    det_kwargs = {
        k: det_block[k]
        for k in ("window_len", "threshold", "epsilon_h", "hold_min")
        if k in det_block
    }
    p0_block = block.get("p0", {})
    p0_kwargs = {k: float(p0_block[k]) for k in ("att", "vel", "pos", "bg", "ba")
                 if k in p0_block}
    try:
        return FilterConfig(
            noise=NoiseConfig(**noise_kwargs),
            detector=DetectorConfig(**det_kwargs),
            p0=InitialUncertainty(**p0_kwargs),
            gated=bool(block.get("gated", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid filter block: {exc}") from exc


def _init_from_dict(block: dict) -> InitSpec:
    deg = np.pi / 180.0
    kwargs = {"mode": block.get("mode", "truth_offset")}
    for side in ("left", "right"):
        if f"att_err_{side}_deg" in block:
            kwargs[f"att_err_{side}"] = _vec3(block, f"att_err_{side}_deg", scale=deg)
        if f"gyro_bias_{side}_dps" in block:
            kwargs[f"gyro_bias_{side}"] = _vec3(
                block, f"gyro_bias_{side}_dps", scale=deg
            )
        if f"accel_bias_{side}" in block:
            kwargs[f"accel_bias_{side}"] = _vec3(block, f"accel_bias_{side}")
        if f"euler_{side}_deg" in block:
            kwargs[f"euler_{side}"] = _vec3(block, f"euler_{side}_deg", scale=deg)
        if f"position_{side}_deg" in block:
            lat, lon, h = block[f"position_{side}_deg"]
            kwargs[f"position_{side}"] = (lat * deg, lon * deg, float(h))
        if f"heading_{side}_deg" in block:
            kwargs[f"heading_{side}"] = float(block[f"heading_{side}_deg"]) * deg
    if "window_s" in block:
        kwargs["window_s"] = float(block["window_s"])
    try:
        return InitSpec(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid init block: {exc}") from exc


def load_config(path, mode: str, overrides: dict | None = None) -> RunConfig:
    """Parse a JSON config file into a RunConfig for the given CLI mode."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")

    overrides = overrides or {}
    levers = {}
    lever_block = doc.get("levers", {})
    for side in ("left", "right"):
        if side in lever_block:
            levers[side] = _vec3(lever_block, side)
    cfg = RunConfig(
        mode=mode,
        gait=_gait_from_dict(doc.get("gait", {}), levers),
        filter=_filter_from_dict(doc.get("filter", {})),
        init=_init_from_dict(doc.get("init", {})),
        seed=int(overrides.get("seed", doc.get("seed", 0))),
        variants=tuple(overrides.get("variants") or doc.get("variants", ("zupt", "zupt-rng"))),
        out_dir=overrides.get("out_dir"),
        imu_path=overrides.get("imu_path"),
        range_path=overrides.get("range_path"),
        truth_path=overrides.get("truth_path"),
        write_geojson=bool(overrides.get("geojson", doc.get("geojson", False))),
    )
    return cfg

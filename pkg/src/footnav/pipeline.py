"""End-to-end runner: simulate or replay logs, filter, report.

A run executes one or more filter variants over the same data:

    zupt         zero-velocity updates only
    zupt-rng     plus inter-foot ranging
    zupt-rng-ec  plus the ellipsoid height constraint

and writes per-variant trajectories, a combined summary (start-end absolute
and relative position/yaw/yaw-bias errors when truth is available), and in
observability mode the constraint-batch spectrum and solution series.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fusion, logio, observability, so3
from .detect import DetectorConfig, ellipsoid_trigger, stance_flags
from .earth import (
    WGS84,
    EarthModel,
    GeodeticPosition,
    ecef_from_llh,
    geodetic_to_ecef,
    gravity_magnitude,
    llh_from_ecef,
    n_to_e_rotation,
)
from .fusion import JointState, NoiseConfig, RangeSample
from .gaitsim import GaitParams, build_square_walk
from .logio import DataError, TruthTable
from .strapdown import (
    LEFT,
    RIGHT,
    ImuIncrements,
    ImuStream,
    NavState,
    increments_from_stream,
    initialize,
    propagate,
)

VARIANTS = {
    "zupt": frozenset({"zupt"}),
    "zupt-rng": frozenset({"zupt", "range"}),
    "zupt-rng-ec": frozenset({"zupt", "range", "ellipsoid"}),
}


class ConfigError(RuntimeError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class InitialUncertainty:
    att: float = 0.1     # rad
    vel: float = 0.05    # m/s
    pos: float = 0.01    # m
    bg: float = 0.012    # rad/s
    ba: float = 0.2      # m/s^2


@dataclass(frozen=True)
class InitSpec:
    """How the filter's initial per-foot states are obtained.

    truth_offset: truth state at t=0 plus configured attitude errors and
    bias estimates (simulation studies). explicit: fully specified states.
    stationary: coarse alignment from the first stationary window.
    """

    mode: str = "truth_offset"
    att_err_left: tuple = (0.0, 0.0, 0.0)    # rad, (roll, yaw, pitch)
    att_err_right: tuple = (0.0, 0.0, 0.0)
    gyro_bias_left: tuple = (0.0, 0.0, 0.0)  # rad/s initial estimates
    gyro_bias_right: tuple = (0.0, 0.0, 0.0)
    accel_bias_left: tuple = (0.0, 0.0, 0.0)
    accel_bias_right: tuple = (0.0, 0.0, 0.0)
    # explicit mode:
    euler_left: tuple = (0.0, 0.0, 0.0)
    euler_right: tuple = (0.0, 0.0, 0.0)
    position_left: tuple | None = None       # (lat, lon, h) radians/m
    position_right: tuple | None = None
    # stationary mode:
    heading_left: float = 0.0
    heading_right: float = 0.0
    window_s: float = 1.0

    def __post_init__(self):
        if self.mode not in ("truth_offset", "explicit", "stationary"):
            raise ConfigError(f"unknown init mode {self.mode!r}")


@dataclass(frozen=True)
class FilterConfig:
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    p0: InitialUncertainty = field(default_factory=InitialUncertainty)
    gated: bool = False
    # "epoch": ZUPT at every propagation epoch inside a stance; "once":
    # a single update per stance (velocity errors within one stance are
    # strongly correlated, so repeating the measurement overstates it).
    zupt_cadence: str = "epoch"

    def __post_init__(self):
        if self.zupt_cadence not in ("epoch", "once"):
            raise ConfigError(f"unknown zupt_cadence {self.zupt_cadence!r}")


@dataclass
class RunConfig:
    mode: str
    gait: GaitParams = field(default_factory=GaitParams)
    filter: FilterConfig = field(default_factory=FilterConfig)
    init: InitSpec = field(default_factory=InitSpec)
    variants: tuple = ("zupt", "zupt-rng")
    seed: int = 0
    out_dir: Path | None = None
    imu_path: Path | None = None
    range_path: Path | None = None
    truth_path: Path | None = None
    write_geojson: bool = False

    def __post_init__(self):
        if self.mode not in ("simulate", "replay", "observe"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}")
        if self.mode == "replay" and (self.imu_path is None or self.range_path is None):
            raise ConfigError("replay mode requires IMU and range log paths")


@dataclass
class FilterResult:
    """Epoch-rate estimates of both feet plus the final joint state."""

    t: np.ndarray
    p_e: dict[str, np.ndarray]
    v_e: dict[str, np.ndarray]
    c_be: dict[str, np.ndarray]       # (K, 3, 3)
    stance: dict[str, np.ndarray]
    final: JointState
    update_counts: dict[str, int]

    def trajectory(self, foot: str, origin: GeodeticPosition,
                   model: EarthModel = WGS84) -> TruthTable:
        """Estimates as a trajectory table (velocity in the origin n-frame)."""
        lat, lon, h = llh_from_ecef(self.p_e[foot], model)
        c_ne = n_to_e_rotation(origin, model)
        vel = self.v_e[foot] @ c_ne
        c_bn = np.einsum("ij,kjl->kil", c_ne.T, self.c_be[foot])
        pitch = np.arcsin(np.clip(c_bn[:, 1, 0], -1.0, 1.0))
        yaw = np.arctan2(c_bn[:, 2, 0], c_bn[:, 0, 0])
        roll = np.arctan2(-c_bn[:, 1, 2], c_bn[:, 1, 1])
        euler = np.stack([roll, yaw, pitch], axis=-1)
        return TruthTable(self.t, lat, lon, h, vel, euler,
                          self.stance[foot], foot)


def run_filter(
    imu_left: ImuStream,
    imu_right: ImuStream,
    ranges: list[RangeSample],
    init_left: NavState,
    init_right: NavState,
    fcfg: FilterConfig,
    features: frozenset,
    model: EarthModel = WGS84,
) -> FilterResult:
    """Run the dual-foot error-state filter over full streams.

    Both IMU streams must share the same sample clock. ZUPTs fire on every
    propagation epoch inside a detected stance (or once per stance, per the
    configured cadence); the ellipsoid constraint fires once at each stance
    onset against the previous stance-exit anchor; range updates attach to
    the nearest epoch.
    """
    if len(imu_left) != len(imu_right) or np.max(
        np.abs(imu_left.t - imu_right.t)
    ) > 1e-9:
        raise DataError("left/right IMU streams must share the same sample clock")

    epochs = {}
    flags = {}
    for foot, stream in ((LEFT, imu_left), (RIGHT, imu_right)):
        epochs[foot] = increments_from_stream(stream)
        flags[foot] = stance_flags(stream.gyro, fcfg.detector)
    t_epoch = epochs[LEFT][0]
    n_epochs = len(t_epoch)
    dt_epoch = epochs[LEFT][5]

    # Per-epoch stance: both raw samples of the second half must be flagged.
    epoch_stance = {}
    for foot in (LEFT, RIGHT):
        f = flags[foot]
        k = np.arange(n_epochs)
        epoch_stance[foot] = f[2 * k + 1] & f[2 * k + 2]

    # Range samples indexed by nearest epoch.
    range_at = {}
    if "range" in features:
        half_dt = 0.5 * float(np.median(dt_epoch))
        for r in ranges:
            k = int(np.searchsorted(t_epoch, r.t))
            for kk in (k - 1, k):
                if 0 <= kk < n_epochs and abs(t_epoch[kk] - r.t) <= half_dt:
                    range_at.setdefault(kk, r)
                    break

    p0 = fcfg.p0
    js = JointState(
        init_left.copy(),
        init_right.copy(),
        fusion.initial_covariance(p0.att, p0.vel, p0.pos, p0.bg, p0.ba),
    )

    out_p = {f: np.empty((n_epochs, 3)) for f in (LEFT, RIGHT)}
    out_v = {f: np.empty((n_epochs, 3)) for f in (LEFT, RIGHT)}
    out_c = {f: np.empty((n_epochs, 3, 3)) for f in (LEFT, RIGHT)}
    counts = {"zupt": 0, "range": 0, "ellipsoid": 0, "gated": 0, "skipped": 0}
    anchors: dict[str, GeodeticPosition | None] = {LEFT: None, RIGHT: None}
    was_stance = {LEFT: False, RIGHT: False}

    incr = {f: epochs[f] for f in (LEFT, RIGHT)}
    for k in range(n_epochs):
        dt = float(dt_epoch[k])
        f_avg = {}
        for foot in (LEFT, RIGHT):
            _, dth1, dth2, dv1, dv2, _ = incr[foot]
            state = js.foot(foot)
            new_state, f_b = propagate(
                state,
                ImuIncrements(dth1[k], dth2[k], dv1[k], dv2[k], dt),
                model,
            )
            if foot == LEFT:
                js = replace(js, left=new_state)
            else:
                js = replace(js, right=new_state)
            f_avg[foot] = f_b
        js = fusion.predict(js, f_avg[LEFT], f_avg[RIGHT], dt, fcfg.noise, model)

        for foot in (LEFT, RIGHT):
            in_stance = bool(epoch_stance[foot][k])
            fire_zupt = in_stance and (
                fcfg.zupt_cadence == "epoch" or not was_stance[foot]
            )
            if "zupt" in features and fire_zupt:
                js, info = fusion.update_zupt(js, foot, fcfg.noise, fcfg.gated)
                counts["zupt" if info.applied else "gated"] += 1
            if "ellipsoid" in features:
                if in_stance and not was_stance[foot]:
                    # fire once at stance onset against the previous stance
                    here = _foot_geodetic(js, foot, model)
                    anchor = anchors[foot]
                    if anchor is not None and ellipsoid_trigger(
                        anchor.height, here.height, fcfg.detector
                    ):
                        js, info = fusion.update_ellipsoid(
                            js, foot, anchor, fcfg.noise, model, fcfg.gated
                        )
                        counts["ellipsoid" if info.applied else "gated"] += 1
                elif was_stance[foot] and not in_stance:
                    # anchor at stance exit, after the stance's ZUPT updates
                    anchors[foot] = _foot_geodetic(js, foot, model)
            was_stance[foot] = in_stance

        if "range" in features and k in range_at:
            js, info = fusion.update_range(js, range_at[k], fcfg.noise, fcfg.gated)
            if info.applied:
                counts["range"] += 1
            elif info.mahalanobis > 0.0:
                counts["gated"] += 1
            else:
                counts["skipped"] += 1

        for foot in (LEFT, RIGHT):
            state = js.foot(foot)
            out_p[foot][k] = state.p_e
            out_v[foot][k] = state.v_e
            out_c[foot][k] = state.C_be

    stance_out = {f: epoch_stance[f] for f in (LEFT, RIGHT)}
    return FilterResult(t_epoch, out_p, out_v, out_c, stance_out, js, counts)


def _foot_geodetic(js: JointState, foot: str, model: EarthModel) -> GeodeticPosition:
    lat, lon, h = llh_from_ecef(js.foot(foot).p_e, model)
    return GeodeticPosition(float(lat), float(lon), float(h))


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def init_states_truth_offset(
    truth_left: TruthTable,
    truth_right: TruthTable,
    spec: InitSpec,
    model: EarthModel = WGS84,
) -> tuple[NavState, NavState]:
    """Truth state at t=0 perturbed by configured attitude/bias errors."""
    states = []
    for truth, att_err, bg0, ba0 in (
        (truth_left, spec.att_err_left, spec.gyro_bias_left, spec.accel_bias_left),
        (truth_right, spec.att_err_right, spec.gyro_bias_right, spec.accel_bias_right),
    ):
        pos = GeodeticPosition(float(truth.lat[0]), float(truth.lon[0]),
                               float(truth.h[0]))
        euler = truth.euler[0] + np.asarray(att_err, dtype=float)
        c_bn = so3.matrix_from_rpy(*euler)
        states.append(
            NavState(
                C_be=n_to_e_rotation(pos, model) @ c_bn,
                v_e=np.zeros(3),
                p_e=geodetic_to_ecef(pos, model),
                b_g=np.asarray(bg0, dtype=float).copy(),
                b_a=np.asarray(ba0, dtype=float).copy(),
                t=float(truth.t[0]),
            )
        )
    return states[0], states[1]


def init_states_explicit(spec: InitSpec, model: EarthModel = WGS84):
    states = []
    for pos_t, euler, bg0, ba0 in (
        (spec.position_left, spec.euler_left, spec.gyro_bias_left,
         spec.accel_bias_left),
        (spec.position_right, spec.euler_right, spec.gyro_bias_right,
         spec.accel_bias_right),
    ):
        if pos_t is None:
            raise ConfigError("explicit init requires per-foot positions")
        pos = GeodeticPosition(*pos_t)
        c_bn = so3.matrix_from_rpy(*euler)
        states.append(
            NavState(
                C_be=n_to_e_rotation(pos, model) @ c_bn,
                v_e=np.zeros(3),
                p_e=geodetic_to_ecef(pos, model),
                b_g=np.asarray(bg0, dtype=float).copy(),
                b_a=np.asarray(ba0, dtype=float).copy(),
            )
        )
    return states[0], states[1]


def init_states_stationary(
    imu_left: ImuStream, imu_right: ImuStream, spec: InitSpec,
    model: EarthModel = WGS84
):
    if spec.position_left is None or spec.position_right is None:
        raise ConfigError("stationary init requires per-foot positions")
    out = []
    for stream, pos_t, heading in (
        (imu_left, spec.position_left, spec.heading_left),
        (imu_right, spec.position_right, spec.heading_right),
    ):
        n = int(np.searchsorted(stream.t, stream.t[0] + spec.window_s)) + 1
        out.append(
            initialize(stream.slice(0, n), GeodeticPosition(*pos_t), heading, model)
        )
    return out[0], out[1]


def summarize(
    result: FilterResult,
    truth: dict[str, TruthTable] | None,
    origin: GeodeticPosition,
    truth_gyro_bias: dict[str, np.ndarray] | None = None,
    model: EarthModel = WGS84,
) -> dict:
    """Start-end estimate table in the origin-anchored tangent frame.

    Positions are (North, East) meters from the origin; yaw errors are in
    degrees, wrapped; bias errors in deg/s. Truth-relative fields are only
    present when a truth table is supplied.
    """
    c_ne = n_to_e_rotation(origin, model)
    p0_e = geodetic_to_ecef(origin, model)
    out: dict = {"t_end": float(result.t[-1]), "feet": {}, "updates": dict(result.update_counts)}
    yaw_err = {}
    end_ne_est = {}
    end_ne_truth = {}
    bias_y_est = {}
    for foot in (LEFT, RIGHT):
        tab = result.trajectory(foot, origin, model)
        n0 = c_ne.T @ (ecef_from_llh(tab.lat[-1], tab.lon[-1], tab.h[-1], model) - p0_e)
        end_ne_est[foot] = np.array([n0[0], n0[2]])
        state = result.final.foot(foot)
        bias_y_est[foot] = float(np.rad2deg(state.b_g[1]))
        entry = {
            "end_north_east": [float(n0[0]), float(n0[2])],
            "end_height": float(tab.h[-1]),
            "end_yaw_deg": float(np.rad2deg(_wrap_angle(tab.euler[-1, 1]))),
            "gyro_bias_dps": [float(v) for v in np.rad2deg(state.b_g)],
            "accel_bias": [float(v) for v in state.b_a],
        }
        if truth is not None:
            ttab = truth[foot]
            idx = int(np.searchsorted(ttab.t, result.t[-1] - 1e-9))
            if idx >= len(ttab.t) or abs(ttab.t[idx] - result.t[-1]) > 1e-6:
                raise DataError("truth does not cover the final filter epoch")
            tn0 = c_ne.T @ (
                ecef_from_llh(ttab.lat[idx], ttab.lon[idx], ttab.h[idx], model) - p0_e
            )
            end_ne_truth[foot] = np.array([tn0[0], tn0[2]])
            err_ne = end_ne_est[foot] - end_ne_truth[foot]
            yaw_err[foot] = np.rad2deg(
                _wrap_angle(tab.euler[-1, 1] - ttab.euler[idx, 1])
            )
            entry.update(
                {
                    "truth_north_east": [float(tn0[0]), float(tn0[2])],
                    "position_error": float(np.hypot(*err_ne)),
                    "height_error": float(tab.h[-1] - ttab.h[idx]),
                    "yaw_error_deg": float(yaw_err[foot]),
                }
            )
            if truth_gyro_bias is not None:
                entry["yaw_bias_error_dps"] = float(
                    bias_y_est[foot] - np.rad2deg(truth_gyro_bias[foot][1])
                )
        out["feet"][foot] = entry
    if truth is not None:
        d_est = end_ne_est[LEFT] - end_ne_est[RIGHT]
        d_truth = end_ne_truth[LEFT] - end_ne_truth[RIGHT]
        rel = {
            "position_error": float(np.linalg.norm(d_est - d_truth)),
            "yaw_error_deg": float(
                np.rad2deg(
                    _wrap_angle(np.deg2rad(yaw_err[LEFT]) - np.deg2rad(yaw_err[RIGHT]))
                )
            ),
        }
        if truth_gyro_bias is not None:
            rel["yaw_bias_error_dps"] = float(
                (bias_y_est[LEFT] - bias_y_est[RIGHT])
                - np.rad2deg(truth_gyro_bias[LEFT][1] - truth_gyro_bias[RIGHT][1])
            )
        out["relative"] = rel
    return out


def run(cfg: RunConfig, model: EarthModel = WGS84) -> dict:
    """Execute a configured run; returns {variant: summary} plus metadata."""
    t_start = time.perf_counter()
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    if cfg.mode == "observe":
        return run_observe(cfg, model)

    truth: dict[str, TruthTable] | None = None
    truth_bias = None
    if cfg.mode == "simulate":
        sim = build_square_walk(cfg.gait, seed=cfg.seed, model=model)
        imu_l, imu_r = sim.imu_left, sim.imu_right
        ranges = sim.ranges.samples(cfg.gait.lever_left, cfg.gait.lever_right)
        truth = {
            LEFT: TruthTable.from_stream(sim.truth_left),
            RIGHT: TruthTable.from_stream(sim.truth_right),
        }
        truth_bias = {
            LEFT: np.asarray(cfg.gait.gyro_bias_left, dtype=float),
            RIGHT: np.asarray(cfg.gait.gyro_bias_right, dtype=float),
        }
        if out_dir is not None:
            logio.write_imu_csv(out_dir / "imu.csv", imu_l, imu_r)
            logio.write_range_csv(out_dir / "range.csv", sim.ranges)
            logio.write_trajectory_csv(
                out_dir / "truth.csv", [truth[LEFT], truth[RIGHT]]
            )
    else:
        imu_l, imu_r = logio.read_imu_csv(cfg.imu_path)
        rng_stream = logio.read_range_csv(cfg.range_path)
        ranges = rng_stream.samples(cfg.gait.lever_left, cfg.gait.lever_right)
        if cfg.truth_path is not None:
            truth = logio.read_trajectory_csv(cfg.truth_path)
            truth_bias = {
                LEFT: np.asarray(cfg.gait.gyro_bias_left, dtype=float),
                RIGHT: np.asarray(cfg.gait.gyro_bias_right, dtype=float),
            }

    if cfg.init.mode == "truth_offset":
        if truth is None:
            raise ConfigError("truth_offset init requires simulate mode or a truth log")
        init_l, init_r = init_states_truth_offset(
            truth[LEFT], truth[RIGHT], cfg.init, model
        )
    elif cfg.init.mode == "explicit":
        init_l, init_r = init_states_explicit(cfg.init, model)
    else:
        init_l, init_r = init_states_stationary(imu_l, imu_r, cfg.init, model)

    summaries = {}
    for variant in cfg.variants:
        result = run_filter(
            imu_l, imu_r, ranges, init_l, init_r, cfg.filter,
            VARIANTS[variant], model,
        )
        summaries[variant] = summarize(
            result, truth, cfg.gait.origin, truth_bias, model
        )
        if out_dir is not None:
            tables = [result.trajectory(f, cfg.gait.origin, model) for f in (LEFT, RIGHT)]
            logio.write_trajectory_csv(out_dir / f"traj_{variant}.csv", tables)
            if cfg.write_geojson:
                logio.write_geojson(
                    out_dir / f"traj_{variant}.geojson",
                    tables,
                    properties={"variant": variant},
                )

    report = {"mode": cfg.mode, "seed": cfg.seed, "variants": summaries}
    if out_dir is not None:
        logio.write_summary_json(out_dir / "summary.json", report)
        logio.write_summary_json(
            out_dir / "status.json",
            {"ok": True, "runtime_s": time.perf_counter() - t_start},
        )
    return report


def run_observe(cfg: RunConfig, model: EarthModel = WGS84) -> dict:
    """Constraint-batch analysis on the simulated left foot.

    Accumulates constraints between the first mid-stance epoch and every
    later one (the chains are all anchored at the common start epoch),
    solving the growing batch after each row (spectrum and estimate series).
    Hold segments after the scheduled walk are excluded from anchoring.
    """
    sim = build_square_walk(cfg.gait, seed=cfg.seed, model=model)
    truth = sim.truth_left
    stream = sim.imu_left
    t_e, dth1, dth2, dv1, dv2, dt_e = increments_from_stream(stream)
    dt = float(np.median(dt_e))

    mids = observability.mid_stance_epochs(truth.stance)
    anchors = np.unique(mids // 2)  # epoch indices; anchor k sits at time k*dt
    anchors = anchors[anchors <= len(dth1)]
    t_walk_end = cfg.gait.lead_in + cfg.gait.walk_duration
    anchors = anchors[anchors * dt <= t_walk_end + dt]
    if len(anchors) < 2:
        raise ConfigError("scenario too short: need at least two stance phases")
    g = float(gravity_magnitude(cfg.gait.origin.latitude, cfg.gait.origin.height, model))

    rows = []
    series = []
    batch = observability.ObservabilityBatch(rows)
    a_start = anchors[0]
    for a1 in anchors[1:]:
        row = observability.accumulate_row(
            dth1[a_start:a1], dth2[a_start:a1], dv1[a_start:a1], dv2[a_start:a1],
            dt, g,
            span=(float(a_start * dt), float(a1 * dt)),
        )
        rows.append(row)
        entry = {"t": float(a1 * dt), "n_rows": len(rows)}
        if len(rows) >= 3:
            sol = observability.solve_batch(batch)
            entry["rank"] = sol.rank
            entry["eigenvalues"] = [float(v) for v in observability.eigen_spectrum(batch)]
            if sol.full_rank:
                entry["accel_bias"] = [float(v) for v in sol.accel_bias]
                entry["gyro_bias"] = [float(v) for v in sol.gyro_bias]
                entry["x_theta"] = [float(v) for v in sol.x_theta]
                entry["residual"] = sol.residual
        series.append(entry)

    report = {
        "mode": "observe",
        "seed": cfg.seed,
        "gravity": g,
        "series": series,
    }
    if cfg.out_dir is not None:
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        logio.write_summary_json(out_dir / "observability.json", report)
        with open(out_dir / "spectrum.csv", "w", encoding="utf-8") as f:
            f.write("t," + ",".join(f"eig{i}" for i in range(1, 10)) + "\n")
            for entry in series:
                if "eigenvalues" in entry:
                    f.write(
                        logio.FMT % entry["t"]
                        + ","
                        + ",".join(logio.FMT % v for v in entry["eigenvalues"])
                        + "\n"
                    )
    return report

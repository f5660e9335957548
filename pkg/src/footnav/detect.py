"""Stance-phase detection and the ellipsoid-constraint trigger.

The detector thresholds the windowed mean of squared gyro norms (angular
rate energy). Offline streams get per-sample verdicts from a centered
window; runs of positive verdicts shorter than ``hold_min`` are rejected as
flicker, the rest are declared stance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DetectorConfig:
    window_len: int = 5          # samples
    threshold: float = 0.05      # (rad/s)^2, strict "<"
    epsilon_h: float = 0.1       # m, ellipsoid trigger threshold
    hold_min: int = 3            # minimum run of positive windows

    def __post_init__(self):
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")
        if self.threshold <= 0.0 or self.epsilon_h <= 0.0:
            raise ValueError("threshold and epsilon_h must be positive")
        if self.hold_min < 1:
            raise ValueError("hold_min must be >= 1")


@dataclass(frozen=True)
class StanceEvent:
    t_start: float
    t_end: float
    foot: str

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError("t_end before t_start")


def are_detect(gyro_window: np.ndarray, cfg: DetectorConfig) -> bool:
    """Angular-rate-energy test on one window: mean ||w||^2 < threshold."""
    w = np.asarray(gyro_window, dtype=float)
    if w.shape != (cfg.window_len, 3):
        raise ValueError(f"window must be ({cfg.window_len}, 3), got {w.shape}")
    return bool(np.mean(np.sum(w * w, axis=1)) < cfg.threshold)


def stance_flags(gyro: np.ndarray, cfg: DetectorConfig) -> np.ndarray:
    """Per-sample stance flags for a whole stream.

    Each sample gets the verdict of the window centered on it (truncated at
    the stream edges); positive runs shorter than hold_min are discarded.
    """
    gyro = np.asarray(gyro, dtype=float)
    n = gyro.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    energy = np.sum(gyro * gyro, axis=1)
    half = cfg.window_len // 2
    csum = np.concatenate(([0.0], np.cumsum(energy)))
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + (cfg.window_len - half), n)
    verdict = (csum[hi] - csum[lo]) / (hi - lo) < cfg.threshold
    return _reject_short_runs(verdict, cfg.hold_min)


def _reject_short_runs(flags: np.ndarray, min_len: int) -> np.ndarray:
    out = flags.copy()
    n = len(flags)
    i = 0
    while i < n:
        if flags[i]:
            j = i
            while j < n and flags[j]:
                j += 1
            if j - i < min_len:
                out[i:j] = False
            i = j
        else:
            i += 1
    return out


def stance_events(flags: np.ndarray, t: np.ndarray, foot: str) -> list[StanceEvent]:
    """Contiguous stance runs as timestamped events."""
    flags = np.asarray(flags, dtype=bool)
    events = []
    n = len(flags)
    i = 0
    while i < n:
        if flags[i]:
            j = i
            while j < n and flags[j]:
                j += 1
            events.append(StanceEvent(float(t[i]), float(t[j - 1]), foot))
            i = j
        else:
            i += 1
    return events


def ellipsoid_trigger(h_prev: float, h_curr: float, cfg: DetectorConfig) -> bool:
    """True when two stance heights are close enough to share an ellipsoid.

    Strict inequality: a difference of exactly epsilon_h does not trigger.
    """
    return bool(abs(h_prev - h_curr) < cfg.epsilon_h)

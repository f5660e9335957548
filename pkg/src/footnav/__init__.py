"""Dual foot-mounted IMU pedestrian navigation.

Earth-frame strapdown mechanization for two foot-mounted IMUs, fused by an
error-state Kalman filter with zero-velocity updates, inter-foot ranging
and an ellipsoid height constraint; plus a gait simulator and a
constructive observability analysis for desk-scale verification.
"""

from ._kernels import JIT_ENABLED
from .earth import WGS84, EarthModel, GeodeticPosition
from .fusion import JointState, NoiseConfig, RangeSample
from .gaitsim import GaitParams, build_square_walk
from .strapdown import ImuSample, ImuStream, NavState

__version__ = "0.1.0"

__all__ = [
    "EarthModel",
    "GeodeticPosition",
    "WGS84",
    "NavState",
    "ImuSample",
    "ImuStream",
    "JointState",
    "NoiseConfig",
    "RangeSample",
    "GaitParams",
    "build_square_walk",
    "JIT_ENABLED",
    "__version__",
]

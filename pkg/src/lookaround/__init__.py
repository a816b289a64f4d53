"""Panorama view-search simulator, agents, and benchmark harness."""

from .corruptions import CorruptionKind, CorruptionSpec, corrupt, severity_params
from .environment import (
    Action,
    Difficulty,
    EnvConfig,
    EpisodeSpec,
    LookAroundEnv,
    RewardConfig,
    angular_l1,
    classify_difficulty,
    sample_episode,
)
from .projection import (
    CameraIntrinsics,
    EquirectImage,
    PerspImage,
    ViewRotation,
    make_intrinsics,
    render_perspective,
)

__version__ = "0.1.0"

"""Episode state machine: action dynamics, rewards, termination, sampling.

Rotations are integer degrees whenever the step size is 1 (the default), so a
localization error of exactly zero is attainable. Yaw differences are always
wrapped: two views 2 degrees apart across the +-180 seam are 2 degrees apart,
not 358.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .corruptions import CorruptionSpec, corrupt
from .projection import (
    EquirectImage,
    PerspImage,
    ViewRotation,
    make_intrinsics,
    render_perspective,
    wrap_yaw,
)

__all__ = [
    "Action",
    "Difficulty",
    "EnvConfig",
    "EpisodeDoneError",
    "EpisodeSpec",
    "InfeasibleDifficultyError",
    "LookAroundEnv",
    "MissingPanoramaError",
    "Observation",
    "RewardConfig",
    "StepResult",
    "angular_l1",
    "apply_action",
    "classify_difficulty",
    "compute_reward",
    "load_episode_file",
    "sample_episode",
    "save_episode_file",
]


class Action(str, Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    STOP = "stop"


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"
    UNCLASSIFIED = "unclassified"


MOVEMENT_ACTIONS = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)

# (pitch, yaw) step direction per movement action
_DELTAS = {
    Action.UP: (1, 0),
    Action.DOWN: (-1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


class EpisodeDoneError(RuntimeError):
    """step() called on a finished episode."""


class MissingPanoramaError(KeyError):
    """Episode references a panorama the provider cannot supply."""


class InfeasibleDifficultyError(RuntimeError):
    """No rotation pair satisfies the requested difficulty for this geometry."""


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 100.0
    beta: float = 10.0
    gamma_dist: float = 0.1
    slack: float = -0.01

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class EnvConfig:
    step_deg: int = 1
    pitch_bound: int = 60
    max_steps: int = 5000
    fov_deg: float = 90.0
    obs_width: int = 256
    obs_height: int = 256
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self) -> None:
        if self.step_deg <= 0:
            raise ValueError("step_deg must be positive")
        if not 0 < self.pitch_bound <= 90:
            raise ValueError("pitch_bound must be in (0, 90]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class EpisodeSpec:
    pano: str
    initial: ViewRotation
    target: ViewRotation
    difficulty: str
    fov_deg: float
    corruption: CorruptionSpec | None = None
    seed: int = 0


def angular_l1(a: ViewRotation, b: ViewRotation) -> float:
    """L1 angular distance in degrees, with the yaw term wrapped."""
    dyaw = abs(a.yaw - b.yaw)
    return abs(a.pitch - b.pitch) + min(dyaw, 360 - dyaw)


def apply_action(rot: ViewRotation, action: Action, cfg: EnvConfig) -> ViewRotation:
    """One movement step: pitch clamps at the bound, yaw wraps across +-180."""
    if action == Action.STOP:
        raise ValueError("stop is not a movement action")
    dp, dy = _DELTAS[Action(action)]
    pitch = rot.pitch + dp * cfg.step_deg
    pitch = max(-cfg.pitch_bound, min(cfg.pitch_bound, pitch))
    return ViewRotation(pitch, wrap_yaw(rot.yaw + dy * cfg.step_deg))


def compute_reward(
    prev: ViewRotation,
    cur: ViewRotation,
    target: ViewRotation,
    stopped: bool,
    terminated: bool,
    cfg: RewardConfig,
) -> float:
    """Per-step reward: success term + warmer-colder term + slack.

    A stop step emits the success term only (the agent did not move, so the
    distance and slack terms do not apply). Forced termination earns -alpha on
    top of the usual movement terms.
    """
    if stopped and terminated:
        raise ValueError("a step cannot both stop and be force-terminated")
    if stopped:
        return cfg.alpha / (angular_l1(target, cur) + cfg.beta)
    r_success = -cfg.alpha if terminated else 0.0
    r_dist = cfg.gamma_dist * (angular_l1(target, prev) - angular_l1(target, cur))
    return r_success + r_dist + cfg.slack


def classify_difficulty(
    init: ViewRotation,
    target: ViewRotation,
    fov_deg: float,
    n_min: int = 10,
    step_deg: int = 1,
) -> Difficulty:
    """Difficulty of an (initial, target) pair for a given FoV.

    Easy and medium can overlap geometrically; easy wins. Pairs falling in the
    gap between medium and hard are unclassified and never sampled.
    """
    dpitch = abs(target.pitch - init.pitch)
    dyaw = abs(target.yaw - init.yaw)
    dyaw = min(dyaw, 360 - dyaw)
    l1 = dpitch + dyaw
    l2 = math.hypot(dpitch, dyaw)
    if l2 <= math.sqrt(2.0) * fov_deg / 2.0 and l1 >= n_min * step_deg:
        return Difficulty.EASY
    if fov_deg / 2.0 < l1 <= fov_deg:
        return Difficulty.MEDIUM
    if dpitch > fov_deg and dyaw > fov_deg:
        return Difficulty.HARD
    return Difficulty.UNCLASSIFIED


def sample_episode(
    difficulty: Difficulty | str,
    pano: str,
    fov_deg: float,
    rng: np.random.Generator,
    pitch_bound: int = 60,
    n_min: int = 10,
    corruption: CorruptionSpec | None = None,
    max_attempts: int = 10_000,
) -> EpisodeSpec:
    """Rejection-sample an integer-degree rotation pair of the given difficulty."""
    difficulty = Difficulty(difficulty)
    if difficulty not in (Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD):
        raise ValueError(f"cannot sample difficulty {difficulty}")
    for _ in range(max_attempts):
        pitches = rng.integers(-pitch_bound, pitch_bound + 1, size=2)
        yaws = rng.integers(-179, 181, size=2)
        init = ViewRotation(int(pitches[0]), int(yaws[0]))
        target = ViewRotation(int(pitches[1]), int(yaws[1]))
        if classify_difficulty(init, target, fov_deg, n_min=n_min) == difficulty:
            return EpisodeSpec(
                pano=pano,
                initial=init,
                target=target,
                difficulty=difficulty.value,
                fov_deg=fov_deg,
                corruption=corruption,
                seed=int(rng.integers(0, 2**31 - 1)),
            )
    raise InfeasibleDifficultyError(
        f"no {difficulty.value} pair found for fov={fov_deg}, "
        f"pitch_bound={pitch_bound} in {max_attempts} attempts"
    )


class Observation:
    """Target/current image pair; the current view renders lazily on first use."""

    def __init__(self, target: PerspImage, render_current: Callable[[], PerspImage]):
        self.target = target
        self._render_current = render_current
        self._current: PerspImage | None = None

    @property
    def current(self) -> PerspImage:
        if self._current is None:
            self._current = self._render_current()
        return self._current


@dataclass
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: dict


class LookAroundEnv:
    """A single episode-at-a-time environment over shared read-only panoramas.

    ``panoramas`` maps panorama id to EquirectImage, or is a callable doing the
    same. Instances hold mutable episode state and are not thread-safe; run one
    per worker.
    """

    def __init__(
        self,
        panoramas: Mapping[str, EquirectImage] | Callable[[str], EquirectImage],
        cfg: EnvConfig | None = None,
    ):
        self.cfg = cfg or EnvConfig()
        if callable(panoramas):
            self._lookup = panoramas
        else:
            self._lookup = panoramas.__getitem__
        self._spec: EpisodeSpec | None = None
        self._done = True

    @property
    def spec(self) -> EpisodeSpec:
        if self._spec is None:
            raise RuntimeError("reset() has not been called")
        return self._spec

    @property
    def rotation(self) -> ViewRotation:
        return self._rot

    @property
    def done(self) -> bool:
        return self._done

    @property
    def movement_steps(self) -> int:
        return self._moves

    def reset(self, spec: EpisodeSpec) -> StepResult:
        """Start replaying an episode spec. Deterministic: same spec, same pixels."""
        cfg = self.cfg
        for rot in (spec.initial, spec.target):
            if abs(rot.pitch) > cfg.pitch_bound:
                raise ValueError(f"invalid spec: pitch {rot.pitch} outside pitch bound")
            if cfg.step_deg == 1 and (
                rot.pitch != int(rot.pitch) or rot.yaw != int(rot.yaw)
            ):
                raise ValueError(f"invalid spec: non-integer rotation {rot}")
        try:
            self._pano = self._lookup(spec.pano)
        except KeyError as e:
            raise MissingPanoramaError(spec.pano) from e
        self._cam = make_intrinsics(spec.fov_deg, cfg.obs_width, cfg.obs_height)
        target_img = render_perspective(self._pano, spec.target, self._cam)
        if spec.corruption is not None:
            target_img = PerspImage(corrupt(target_img.pixels, spec.corruption))
        self._target_img = target_img
        self._spec = spec
        self._rot = spec.initial
        self._t = 0
        self._moves = 0
        self._done = False
        self._stop_called = False
        self._forced = False
        return StepResult(self._observation(), 0.0, False, self._info())

    def step(self, action: Action | str) -> StepResult:
        if self._done:
            raise EpisodeDoneError("episode is done; reset() before stepping")
        action = Action(action)
        self._t += 1
        prev = self._rot
        if action == Action.STOP:
            self._done = True
            self._stop_called = True
            reward = compute_reward(
                prev, prev, self._spec.target, True, False, self.cfg.reward
            )
        else:
            self._rot = apply_action(prev, action, self.cfg)
            self._moves += 1
            forced = self._t >= self.cfg.max_steps
            if forced:
                self._done = True
                self._forced = True
            reward = compute_reward(
                prev, self._rot, self._spec.target, False, forced, self.cfg.reward
            )
        return StepResult(self._observation(), reward, self._done, self._info())

    def _observation(self) -> Observation:
        pano, rot, cam = self._pano, self._rot, self._cam
        return Observation(self._target_img, lambda: render_perspective(pano, rot, cam))

    def _info(self) -> dict:
        # rotation/target are evaluator-only; agents must not read them
        return {
            "rotation": (self._rot.pitch, self._rot.yaw),
            "target": (self._spec.target.pitch, self._spec.target.yaw),
            "step": self._t,
            "stop_called": self._stop_called,
            "forced_termination": self._forced,
        }


# Episode files: one flat JSON object per line, degrees as integers.

def _spec_to_record(spec: EpisodeSpec) -> dict:
    rec = {
        "pano": spec.pano,
        "init_pitch": int(spec.initial.pitch),
        "init_yaw": int(spec.initial.yaw),
        "target_pitch": int(spec.target.pitch),
        "target_yaw": int(spec.target.yaw),
        "difficulty": spec.difficulty,
        "fov": int(spec.fov_deg) if spec.fov_deg == int(spec.fov_deg) else spec.fov_deg,
        "seed": int(spec.seed),
    }
    if spec.corruption is not None:
        rec["corruption_kind"] = spec.corruption.kind.value
        rec["corruption_severity"] = spec.corruption.severity
    return rec


def _spec_from_record(rec: dict) -> EpisodeSpec:
    corruption = None
    if "corruption_kind" in rec:
        corruption = CorruptionSpec(
            rec["corruption_kind"], rec["corruption_severity"], rec.get("seed", 0)
        )
    return EpisodeSpec(
        pano=rec["pano"],
        initial=ViewRotation(rec["init_pitch"], rec["init_yaw"]),
        target=ViewRotation(rec["target_pitch"], rec["target_yaw"]),
        difficulty=rec["difficulty"],
        fov_deg=float(rec["fov"]),
        corruption=corruption,
        seed=int(rec.get("seed", 0)),
    )


def save_episode_file(specs: Iterable[EpisodeSpec], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for spec in specs:
            f.write(json.dumps(_spec_to_record(spec), sort_keys=True) + "\n")


def load_episode_file(path: str | Path) -> list[EpisodeSpec]:
    specs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                specs.append(_spec_from_record(json.loads(line)))
    return specs


def with_corruption(spec: EpisodeSpec, kind: str, severity: int) -> EpisodeSpec:
    """Copy of an episode spec with the target corrupted (seeded by the episode seed)."""
    return replace(spec, corruption=CorruptionSpec(kind, severity, spec.seed))

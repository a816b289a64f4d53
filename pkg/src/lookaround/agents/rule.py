"""Feature-matching rule agent: match, vote on displacements, take the mode.

Each accepted match votes for one action based on its pixel displacement in an
x-right / y-up frame; near-zero displacement votes stop. With too few
keypoints or matches the agent sweeps sideways, continuing its previous
direction. An oscillation watchdog forces stop when the agent ping-pongs
between two opposing moves.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import cv2
import numpy as np

from ..environment import Action
from .features import Keypoint, Match, detect_and_compute, knn_ratio_match

__all__ = [
    "RuleAgentConfig",
    "RuleAgentState",
    "RuleBasedAgent",
    "consensus",
    "estimate_action",
]

_OPPOSITE = {
    Action.LEFT: Action.RIGHT,
    Action.RIGHT: Action.LEFT,
    Action.UP: Action.DOWN,
    Action.DOWN: Action.UP,
}

# deterministic tie-break order for the vote mode
_VOTE_ORDER = (Action.STOP, Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)

DetectorFn = Callable[[np.ndarray], tuple[list[Keypoint], np.ndarray]]


@dataclass(frozen=True)
class RuleAgentConfig:
    d_thresh: float = math.inf
    min_keypoints: int = 500
    min_matches: int = 10
    ratio: float = 0.7
    zero_px: float = 1.0
    sweep_default: Action = Action.RIGHT
    oscillation_window: int = 6
    metric: str = "hamming"

    def __post_init__(self) -> None:
        if self.min_keypoints < 1 or self.min_matches < 1:
            raise ValueError("keypoint/match thresholds must be >= 1")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must be in (0, 1)")
        if self.zero_px <= 0:
            raise ValueError("zero_px must be positive")
        if self.sweep_default not in (Action.LEFT, Action.RIGHT):
            raise ValueError("sweep_default must be left or right")


@dataclass
class RuleAgentState:
    prev_action: Action | None = None
    history: list[Action] = field(default_factory=list)
    target_features: tuple[list[Keypoint], np.ndarray] | None = None


def consensus(
    matches: Sequence[Match],
    kps_current: Sequence[Keypoint],
    kps_target: Sequence[Keypoint],
    a_prev: Action,
    cfg: RuleAgentConfig,
) -> Action:
    """Mode of per-match displacement votes; falls back to a_prev with no votes.

    Matches with distance above d_thresh are discarded. Ties between vote
    counts break by the fixed order stop, up, down, left, right.
    """
    votes: Counter[Action] = Counter()
    for m in matches:
        if m.distance > cfg.d_thresh:
            continue
        kc = kps_current[m.current_index]
        kt = kps_target[m.target_index]
        dx = kc.x - kt.x
        dy = kt.y - kc.y  # rows grow downward; flip to y-up
        if abs(dx) <= cfg.zero_px and abs(dy) <= cfg.zero_px:
            votes[Action.STOP] += 1
        elif abs(dx) > abs(dy):
            votes[Action.RIGHT if dx > 0 else Action.LEFT] += 1
        else:
            votes[Action.UP if dy > 0 else Action.DOWN] += 1
    if not votes:
        return a_prev
    best = max(votes.values())
    return next(a for a in _VOTE_ORDER if votes.get(a) == best)


def _metric_view(desc: np.ndarray, metric: str) -> np.ndarray:
    # plug-in descriptors arrive as raw bytes; euclidean matching reads them
    # as packed float32
    if metric == "l2" and desc.dtype == np.uint8 and desc.size:
        return desc.view(np.float32)
    return desc


def _is_oscillating(history: Sequence[Action], window: int) -> bool:
    if len(history) < window:
        return False
    tail = history[-window:]
    a, b = tail[0], tail[1]
    if _OPPOSITE.get(a) != b:
        return False
    return all(tail[i] == (a if i % 2 == 0 else b) for i in range(window))


def estimate_action(
    target_img: np.ndarray,
    current_img: np.ndarray,
    state: RuleAgentState,
    cfg: RuleAgentConfig,
    detector: DetectorFn = detect_and_compute,
) -> Action:
    """One decision of the rule agent on an (target, current) RGB pair."""
    fallback = state.prev_action or cfg.sweep_default
    if state.target_features is None:
        # the target never changes within an episode
        state.target_features = detector(cv2.cvtColor(target_img, cv2.COLOR_RGB2GRAY))
    kps_t, desc_t = state.target_features
    kps_c, desc_c = detector(cv2.cvtColor(current_img, cv2.COLOR_RGB2GRAY))

    if len(kps_t) < cfg.min_keypoints or len(kps_c) < cfg.min_keypoints:
        action = fallback
    else:
        matches = knn_ratio_match(
            _metric_view(desc_c, cfg.metric),
            _metric_view(desc_t, cfg.metric),
            cfg.ratio,
            cfg.metric,
        )
        if len(matches) < cfg.min_matches:
            action = fallback
        else:
            action = consensus(matches, kps_c, kps_t, fallback, cfg)

    state.history.append(action)
    if action != Action.STOP and _is_oscillating(state.history, cfg.oscillation_window):
        return Action.STOP
    if action != Action.STOP:
        state.prev_action = action
    return action


class RuleBasedAgent:
    """Stateful wrapper around estimate_action for benchmark runs."""

    def __init__(
        self,
        cfg: RuleAgentConfig | None = None,
        detector: DetectorFn = detect_and_compute,
    ):
        self.cfg = cfg or RuleAgentConfig()
        self.detector = detector
        self.state = RuleAgentState()

    def reset(self) -> None:
        self.state = RuleAgentState()

    def act(self, target_img: np.ndarray, current_img: np.ndarray) -> Action:
        return estimate_action(target_img, current_img, self.state, self.cfg, self.detector)

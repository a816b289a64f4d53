"""Evaluation-only agent with access to the true rotations.

Walks a shortest path (larger axis gap first, yaw wrap-aware) and stops at
zero distance. Used to validate the environment and metrics end to end.
"""

from __future__ import annotations

from ..environment import Action
from ..projection import ViewRotation

__all__ = ["OracleAgent", "oracle_act"]


def oracle_act(current: ViewRotation, target: ViewRotation) -> Action:
    dpitch = target.pitch - current.pitch
    dyaw = target.yaw - current.yaw
    if dyaw > 180:
        dyaw -= 360
    elif dyaw <= -180:
        dyaw += 360
    if dpitch == 0 and dyaw == 0:
        return Action.STOP
    if abs(dpitch) >= abs(dyaw) and dpitch != 0:
        return Action.UP if dpitch > 0 else Action.DOWN
    return Action.RIGHT if dyaw > 0 else Action.LEFT


class OracleAgent:
    uses_true_state = True

    def reset(self) -> None:
        pass

    def act(self, current: ViewRotation, target: ViewRotation) -> Action:
        return oracle_act(current, target)

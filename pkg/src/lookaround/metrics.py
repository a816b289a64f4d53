"""Evaluation metrics over completed episodes.

Localization error is reported as the per-episode mean. Path length counts
movement actions only; the stop action is free, so a perfect shortest-path
agent scores a path-efficiency of exactly 100%.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .environment import angular_l1
from .projection import ViewRotation

__all__ = [
    "BenchmarkRow",
    "EpisodeOutcome",
    "aggregate",
    "format_table",
    "localization_error",
    "oracle_path_length",
    "rows_to_csv",
    "spl",
]


@dataclass(frozen=True)
class EpisodeOutcome:
    episode_id: str
    initial: ViewRotation
    final: ViewRotation
    target: ViewRotation
    path_length: int
    stop_called: bool
    forced: bool

    def __post_init__(self) -> None:
        if self.path_length < 0:
            raise ValueError("path_length must be >= 0")
        if self.stop_called == self.forced:
            raise ValueError("episode must either stop or be force-terminated")


@dataclass(frozen=True)
class BenchmarkRow:
    eps: float          # mean localization error, degrees
    omega_stop: float   # % episodes stopped
    omega_perf: float   # % of stopped episodes with zero error
    spl: float          # % success weighted by path length
    n: int
    n_stop: int
    n_perf: int


def localization_error(outcome: EpisodeOutcome) -> float:
    """Wrapped L1 angular distance between final and target rotations."""
    return angular_l1(outcome.target, outcome.final)


def oracle_path_length(init: ViewRotation, target: ViewRotation, step_deg: int = 1) -> int:
    """Minimal movement-step count between two on-grid rotations."""
    d = angular_l1(init, target)
    steps = d / step_deg
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError(f"rotations are not on the {step_deg}-degree grid")
    return int(round(steps))


def _spl_term(outcome: EpisodeOutcome, step_deg: int) -> float:
    if localization_error(outcome) != 0:
        return 0.0
    l_oracle = oracle_path_length(outcome.initial, outcome.target, step_deg)
    if l_oracle == 0:
        return 1.0
    return l_oracle / max(outcome.path_length, l_oracle)


def spl(outcomes: Sequence[EpisodeOutcome], step_deg: int = 1) -> float:
    """Success weighted by normalized inverse path length, in percent."""
    if not outcomes:
        raise ValueError("empty outcome list")
    return 100.0 * sum(_spl_term(o, step_deg) for o in outcomes) / len(outcomes)


def aggregate(outcomes: Sequence[EpisodeOutcome], step_deg: int = 1) -> BenchmarkRow:
    """Benchmark row over an episode set; permutation-invariant."""
    if not outcomes:
        raise ValueError("empty outcome list")
    n = len(outcomes)
    errors = [localization_error(o) for o in outcomes]
    stopped = [o for o in outcomes if o.stop_called]
    n_stop = len(stopped)
    n_perf = sum(1 for o in stopped if localization_error(o) == 0)
    return BenchmarkRow(
        eps=sum(errors) / n,
        omega_stop=100.0 * n_stop / n,
        omega_perf=(100.0 * n_perf / n_stop) if n_stop else 0.0,
        spl=spl(outcomes, step_deg),
        n=n,
        n_stop=n_stop,
        n_perf=n_perf,
    )


CSV_HEADER = "difficulty,eps,omega_stop,omega_perf,spl,n,n_stop,n_perf"


def rows_to_csv(rows: Iterable[tuple[str, BenchmarkRow]]) -> str:
    lines = [CSV_HEADER]
    for label, r in rows:
        lines.append(
            f"{label},{r.eps:.4f},{r.omega_stop:.2f},{r.omega_perf:.2f},"
            f"{r.spl:.2f},{r.n},{r.n_stop},{r.n_perf}"
        )
    return "\n".join(lines) + "\n"


def format_table(rows: Iterable[tuple[str, BenchmarkRow]], title: str = "") -> str:
    """Aligned plain-text result table, one row per cell."""
    out = io.StringIO()
    if title:
        out.write(title + "\n")
    header = f"{'cell':<24} {'eps':>8} {'w_stop':>8} {'w_perf':>8} {'spl':>8} {'n':>6}"
    out.write(header + "\n")
    out.write("-" * len(header) + "\n")
    for label, r in rows:
        out.write(
            f"{label:<24} {r.eps:>8.2f} {r.omega_stop:>7.1f}% {r.omega_perf:>7.1f}% "
            f"{r.spl:>7.1f}% {r.n:>6}\n"
        )
    return out.getvalue()

"""Benchmark harness: run agents over episode sets, aggregate, trace, time.

Traces are append-only JSON lines (one step per line plus episode begin/end
records), so every table cell can be recomputed offline from its trace file,
and an interrupted run resumes without redoing finished episodes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import json

from .agents import OracleAgent, RuleAgentConfig, RuleBasedAgent
from .client import RemoteActClient
from .environment import (
    Action,
    EnvConfig,
    EpisodeSpec,
    LookAroundEnv,
    load_episode_file,
    with_corruption,
)
from .metrics import BenchmarkRow, EpisodeOutcome, aggregate, format_table, rows_to_csv
from .projection import ViewRotation
from .server import encode_observation

__all__ = [
    "BenchConfig",
    "GridSearchResult",
    "agent_factory_from_spec",
    "default_grid",
    "measure_fps",
    "outcomes_from_trace",
    "param_search",
    "run_benchmark",
    "run_episodes",
]


@dataclass
class BenchConfig:
    agent: str
    episode_files: Mapping[str, Path]      # label -> episode file
    out_dir: Path
    corruptions: Sequence[tuple[str, int]] = ()
    env: EnvConfig = field(default_factory=EnvConfig)
    include_clean: bool = True


@dataclass
class GridSearchResult:
    grid: list[float]
    table: dict[str, dict[float, float]]   # difficulty -> d_thresh -> mean eps
    argmin: dict[str, float]


class RemoteAgent:
    """Benchmark-side adapter for an external policy act-service."""

    def __init__(self, client: RemoteActClient):
        self.client = client

    def reset(self) -> None:
        self.client.reset()

    def act(self, target_img, current_img) -> Action:
        return self.client.act(encode_observation(target_img, current_img))


def agent_factory_from_spec(spec: str) -> Callable[[], object]:
    """Agent factory from a CLI spec like 'oracle', 'rule-orb:d_thresh=60',
    or 'remote:HOST:PORT'."""
    name, _, args = spec.partition(":")
    if name == "oracle":
        return OracleAgent
    if name == "rule-orb":
        kwargs = {}
        if args:
            for pair in args.split(","):
                key, _, value = pair.partition("=")
                kwargs[key] = math.inf if value == "inf" else _parse_num(value)
        if "d_thresh" in kwargs:
            kwargs["d_thresh"] = float(kwargs["d_thresh"])
        cfg = RuleAgentConfig(**kwargs)
        return lambda: RuleBasedAgent(cfg)
    if name == "remote":
        host, _, port = args.rpartition(":")
        return lambda: RemoteAgent(RemoteActClient(address=(host, int(port))))
    raise ValueError(f"unknown agent spec: {spec}")


def _parse_num(value: str):
    f = float(value)
    return int(f) if f == int(f) else f


def _run_one(env: LookAroundEnv, agent, spec: EpisodeSpec, trace, episode_id: str):
    uses_true_state = getattr(agent, "uses_true_state", False)
    agent.reset()
    result = env.reset(spec)
    trace.write(json.dumps({
        "type": "episode", "episode": episode_id, "pano": spec.pano,
        "init": [spec.initial.pitch, spec.initial.yaw],
        "target": [spec.target.pitch, spec.target.yaw],
        "difficulty": spec.difficulty, "fov": spec.fov_deg, "seed": spec.seed,
    }) + "\n")
    error = None
    while not result.done:
        try:
            if uses_true_state:
                action = agent.act(env.rotation, spec.target)
            else:
                action = agent.act(
                    result.observation.target.pixels, result.observation.current.pixels
                )
        except Exception as e:  # noqa: BLE001 - agent crash is a recorded outcome
            error = f"{type(e).__name__}: {e}"
            break
        result = env.step(action)
        pitch, yaw = result.info["rotation"]
        trace.write(json.dumps({
            "type": "step", "episode": episode_id, "t": result.info["step"],
            "action": Action(action).value, "reward": result.reward,
            "pitch": pitch, "yaw": yaw,
        }) + "\n")
    stop_called = result.info["stop_called"] and error is None
    outcome = EpisodeOutcome(
        episode_id=episode_id,
        initial=spec.initial,
        final=env.rotation,
        target=spec.target,
        path_length=env.movement_steps,
        stop_called=stop_called,
        forced=not stop_called,
    )
    end = {
        "type": "end", "episode": episode_id,
        "final": [outcome.final.pitch, outcome.final.yaw],
        "init": [spec.initial.pitch, spec.initial.yaw],
        "target": [spec.target.pitch, spec.target.yaw],
        "path_length": outcome.path_length,
        "stop_called": outcome.stop_called, "forced": outcome.forced,
    }
    if error:
        end["error"] = error
    trace.write(json.dumps(end) + "\n")
    trace.flush()
    return outcome


def _outcome_from_end(rec: dict) -> EpisodeOutcome:
    return EpisodeOutcome(
        episode_id=rec["episode"],
        initial=ViewRotation(*rec["init"]),
        final=ViewRotation(*rec["final"]),
        target=ViewRotation(*rec["target"]),
        path_length=rec["path_length"],
        stop_called=rec["stop_called"],
        forced=rec["forced"],
    )


def outcomes_from_trace(path: str | Path) -> list[EpisodeOutcome]:
    """Recompute outcomes offline from a trace file (completed episodes only)."""
    outcomes = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["type"] == "end":
                outcomes.append(_outcome_from_end(rec))
    return outcomes


def _resume_trace(path: Path) -> dict[str, EpisodeOutcome]:
    """Completed episodes in an existing trace; drops any partial tail records."""
    if not path.exists():
        return {}
    lines = path.read_text(encoding="utf-8").splitlines()
    records = [json.loads(s) for s in lines if s.strip()]
    finished = {r["episode"] for r in records if r["type"] == "end"}
    kept = [s for s, r in zip(lines, records) if r["episode"] in finished]
    path.write_text("\n".join(kept) + ("\n" if kept else ""), encoding="utf-8")
    return {
        r["episode"]: _outcome_from_end(r)
        for r in records
        if r["type"] == "end"
    }


def run_episodes(
    env: LookAroundEnv,
    agent_factory: Callable[[], object],
    specs: Sequence[EpisodeSpec],
    trace_path: str | Path,
) -> list[EpisodeOutcome]:
    """Run every episode to done, resuming from an existing trace if present."""
    trace_path = Path(trace_path)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    done = _resume_trace(trace_path)
    agent = agent_factory()
    outcomes = []
    with open(trace_path, "a", encoding="utf-8") as trace:
        for i, spec in enumerate(specs):
            episode_id = f"ep{i:05d}"
            if episode_id in done:
                outcomes.append(done[episode_id])
                continue
            outcomes.append(_run_one(env, agent, spec, trace, episode_id))
    return outcomes


def _cell_label(difficulty: str, corruption: tuple[str, int] | None) -> str:
    if corruption is None:
        return difficulty
    return f"{difficulty}+{corruption[0]}:{corruption[1]}"


def run_benchmark(
    cfg: BenchConfig,
    panoramas,
) -> dict[str, BenchmarkRow]:
    """All (difficulty, corruption) cells; writes CSV, table, and traces."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = LookAroundEnv(panoramas, cfg.env)
    factory = agent_factory_from_spec(cfg.agent)
    cells: list[tuple[str, tuple[str, int] | None]] = []
    for label in cfg.episode_files:
        if cfg.include_clean:
            cells.append((label, None))
        cells.extend((label, c) for c in cfg.corruptions)
    rows: dict[str, BenchmarkRow] = {}
    for label, corruption in cells:
        specs = load_episode_file(cfg.episode_files[label])
        if corruption is not None:
            specs = [with_corruption(s, corruption[0], corruption[1]) for s in specs]
        cell = _cell_label(label, corruption)
        trace_path = out / f"trace_{cell.replace(':', '-').replace('+', '_')}.jsonl"
        outcomes = run_episodes(env, factory, specs, trace_path)
        rows[cell] = aggregate(outcomes, cfg.env.step_deg)
    items = list(rows.items())
    (out / "results.csv").write_text(rows_to_csv(items), encoding="utf-8")
    (out / "results.txt").write_text(format_table(items), encoding="utf-8")
    return rows


def default_grid() -> list[float]:
    return [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0, math.inf]


def param_search(
    make_agent: Callable[[float], object],
    episodes_by_difficulty: Mapping[str, Sequence[EpisodeSpec]],
    panoramas,
    grid: Sequence[float] | None = None,
    env_cfg: EnvConfig | None = None,
    out_dir: str | Path | None = None,
) -> GridSearchResult:
    """Evaluate a distance-threshold grid per difficulty; argmin of mean error.

    Ties break toward the smallest threshold (infinity counts as largest).
    """
    grid = list(grid) if grid is not None else default_grid()
    if not grid:
        raise ValueError("empty grid")
    env = LookAroundEnv(panoramas, env_cfg or EnvConfig())
    table: dict[str, dict[float, float]] = {}
    argmin: dict[str, float] = {}
    for difficulty, specs in episodes_by_difficulty.items():
        table[difficulty] = {}
        for d in grid:
            if out_dir is not None:
                name = "inf" if math.isinf(d) else f"{d:g}"
                trace = Path(out_dir) / f"grid_{difficulty}_{name}.jsonl"
            else:
                import tempfile

                trace = Path(tempfile.mkdtemp()) / "trace.jsonl"
            outcomes = run_episodes(env, lambda d=d: make_agent(d), specs, trace)
            table[difficulty][d] = aggregate(outcomes).eps
        best = min(table[difficulty].values())
        argmin[difficulty] = min(d for d, v in table[difficulty].items() if v == best)
    return GridSearchResult(grid=grid, table=table, argmin=argmin)


def measure_fps(
    agent,
    specs: Sequence[EpisodeSpec],
    panoramas,
    env_cfg: EnvConfig | None = None,
    warmup: int = 1,
) -> float:
    """Frames per second over agent act() calls only; excludes rendering time."""
    if not specs:
        raise ValueError("need at least one episode")
    env = LookAroundEnv(panoramas, env_cfg or EnvConfig())
    uses_true_state = getattr(agent, "uses_true_state", False)
    acts = 0
    total = 0.0
    for i, spec in enumerate(specs):
        agent.reset()
        result = env.reset(spec)
        timed = i >= warmup
        while not result.done:
            if uses_true_state:
                args = (env.rotation, spec.target)
            else:
                args = (result.observation.target.pixels, result.observation.current.pixels)
            t0 = time.perf_counter()
            action = agent.act(*args)
            dt = time.perf_counter() - t0
            if timed:
                acts += 1
                total += dt
            result = env.step(action)
    if acts == 0 or total == 0.0:
        raise ValueError("no timed act() calls; add episodes beyond the warmup")
    return acts / total

#!/usr/bin/env python3
"""Desk-scale rule-agent experiment on synthetic panoramas.

Pipeline: panoramas -> per-difficulty episode sets -> d_thresh grid search on
a validation set -> benchmark on the test set with the best threshold per
difficulty -> result tables (optionally with corrupted targets).
"""

import argparse
import math
from pathlib import Path

from lookaround.agents import RuleAgentConfig, RuleBasedAgent
from lookaround.bench import default_grid, param_search, run_episodes
from lookaround.dataset import build_catalog, generate_episode_set
from lookaround.environment import EnvConfig, LookAroundEnv, save_episode_file, with_corruption
from lookaround.metrics import aggregate, format_table, rows_to_csv

DIFFICULTIES = ("easy", "medium", "hard")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--panos", type=Path, required=True, help="panorama directory")
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--fov", type=float, default=90.0)
    ap.add_argument("--n-val", type=int, default=2, help="validation episodes per pano")
    ap.add_argument("--n-test", type=int, default=5, help="test episodes per pano")
    ap.add_argument("--max-steps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--corruption", default=None, help="kind:severity, e.g. fog:3")
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    catalog = build_catalog(args.panos)
    panoramas = catalog.loader()
    env_cfg = EnvConfig(fov_deg=args.fov, max_steps=args.max_steps)
    env = LookAroundEnv(panoramas, env_cfg)

    validation = {
        d: generate_episode_set(catalog, d, args.n_val, args.fov, seed=args.seed + 1)
        for d in DIFFICULTIES
    }
    print("grid search over", default_grid())
    search = param_search(
        lambda dt: RuleBasedAgent(RuleAgentConfig(d_thresh=dt)),
        validation,
        panoramas,
        env_cfg=env_cfg,
        out_dir=args.out / "grid",
    )
    for d in DIFFICULTIES:
        cells = "  ".join(
            f"{'inf' if math.isinf(k) else int(k)}:{v:.2f}"
            for k, v in search.table[d].items()
        )
        print(f"  {d:8s} {cells}")
    print("best d_thresh:", search.argmin)

    corruption = None
    if args.corruption:
        kind, _, severity = args.corruption.partition(":")
        corruption = (kind, int(severity))

    rows = []
    for d in DIFFICULTIES:
        specs = generate_episode_set(catalog, d, args.n_test, args.fov, seed=args.seed + 2)
        if corruption:
            specs = [with_corruption(s, *corruption) for s in specs]
        save_episode_file(specs, args.out / f"test_{d}.jsonl")
        agent_cfg = RuleAgentConfig(d_thresh=search.argmin[d])
        outcomes = run_episodes(
            env, lambda: RuleBasedAgent(agent_cfg), specs, args.out / f"trace_{d}.jsonl"
        )
        label = d if not corruption else f"{d}+{corruption[0]}:{corruption[1]}"
        rows.append((label, aggregate(outcomes)))

    (args.out / "results.csv").write_text(rows_to_csv(rows))
    table = format_table(rows, title=f"rule agent, fov={args.fov:g}")
    (args.out / "results.txt").write_text(table)
    print(table, end="")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Measure aggregate environment-server throughput with pipelined stepping."""

import argparse
import tempfile
import threading
import time
from pathlib import Path

import numpy as np

from lookaround.client import EnvClient
from lookaround.dataset import synth_panorama
from lookaround.environment import EnvConfig, sample_episode, save_episode_file
from lookaround.server import EnvServer, FileEpisodeSource, ServeConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-envs", type=int, default=16)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--obs", type=int, default=256)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--depth", type=int, default=8, help="pipelining window")
    args = ap.parse_args()

    panos = {"p0": synth_panorama("grid-tags", 1024, 512, seed=1)}
    rng = np.random.default_rng(0)
    specs = [sample_episode("easy", "p0", 90.0, rng) for _ in range(args.n_envs)]
    eps = Path(tempfile.mkdtemp()) / "eps.jsonl"
    save_episode_file(specs, eps)

    server = EnvServer(
        panos,
        FileEpisodeSource(eps, args.n_envs),
        ServeConfig(
            n_envs=args.n_envs,
            env=EnvConfig(obs_width=args.obs, obs_height=args.obs, max_steps=10**9),
            workers=args.workers,
        ),
    )
    thread = threading.Thread(target=server.serve_tcp, daemon=True)
    thread.start()
    server.ready.wait()

    client = EnvClient("127.0.0.1", server.bound_port)
    client.handshake()
    for env in range(args.n_envs):
        client.reset(env)

    moves = ["up", "down", "left", "right"]
    t0 = time.perf_counter()
    in_flight = 0
    for i in range(args.steps):
        client.send_request(
            {"op": "step", "env": i % args.n_envs, "action": moves[i % 4]}
        )
        in_flight += 1
        if in_flight >= args.depth:
            client.read_reply()
            in_flight -= 1
    while in_flight:
        client.read_reply()
        in_flight -= 1
    elapsed = time.perf_counter() - t0
    client.close()
    print(
        f"{args.steps} steps over {args.n_envs} envs at {args.obs}x{args.obs}: "
        f"{args.steps / elapsed:.0f} steps/s ({elapsed:.1f}s, workers={args.workers})"
    )


if __name__ == "__main__":
    main()

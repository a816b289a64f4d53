"""Command-line interface.

Subcommands: render, corrupt, synth, episodes, serve, bench {run,grid,fps}.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import cv2
import numpy as np

from .bench import (
    BenchConfig,
    agent_factory_from_spec,
    measure_fps,
    param_search,
    run_benchmark,
)
from .corruptions import CorruptionKind, CorruptionSpec, corrupt
from .dataset import build_catalog, generate_episode_set, synth_panorama
from .environment import EnvConfig, load_episode_file, save_episode_file
from .projection import ViewRotation, make_intrinsics, render_perspective
from .server import EnvServer, FileEpisodeSource, SamplerEpisodeSource, ServeConfig


def _size(value: str) -> tuple[int, int]:
    w, _, h = value.partition("x")
    return int(w), int(h)


def _read_rgb(path: str) -> np.ndarray:
    bgr = cv2.imread(path, cv2.IMREAD_COLOR)
    if bgr is None:
        raise SystemExit(f"cannot read image: {path}")
    return np.ascontiguousarray(bgr[:, :, ::-1])


def _write_rgb(path: str, rgb: np.ndarray) -> None:
    if not cv2.imwrite(path, np.ascontiguousarray(rgb[:, :, ::-1])):
        raise SystemExit(f"cannot write image: {path}")


def _cmd_render(args) -> None:
    from .projection import EquirectImage

    pano = EquirectImage(_read_rgb(args.pano))
    w, h = args.size
    cam = make_intrinsics(args.fov, w, h)
    view = render_perspective(pano, ViewRotation.canonical(args.pitch, args.yaw), cam)
    _write_rgb(args.out, view.pixels)
    print(f"wrote {args.out} ({w}x{h}, fov {args.fov}, pitch {args.pitch}, yaw {args.yaw})")


def _cmd_corrupt(args) -> None:
    img = _read_rgb(getattr(args, "in"))
    out = corrupt(img, CorruptionSpec(args.kind, args.severity, args.seed))
    _write_rgb(args.out, out)
    print(f"wrote {args.out} ({args.kind} severity {args.severity})")


def _cmd_synth(args) -> None:
    w, h = args.size
    pano = synth_panorama(args.kind, w, h, args.seed)
    _write_rgb(args.out, pano.pixels)
    print(f"wrote {args.out} ({args.kind}, {w}x{h}, seed {args.seed})")


def _cmd_episodes(args) -> None:
    catalog = build_catalog(args.panos)
    corruption = _parse_corruption(args.corruption) if args.corruption else None
    specs = generate_episode_set(
        catalog, args.difficulty, args.n_per_pano, args.fov, args.seed,
        corruption=corruption,
    )
    save_episode_file(specs, args.out)
    print(f"wrote {args.out}: {len(specs)} episodes over {len(catalog)} panoramas")


def _parse_corruption(value: str) -> tuple[str, int]:
    kind, _, severity = value.partition(":")
    CorruptionKind(kind)
    return kind, int(severity)


def _env_config(args) -> EnvConfig:
    w, h = args.obs_size
    return EnvConfig(fov_deg=args.fov, obs_width=w, obs_height=h, max_steps=args.max_steps)


def _cmd_serve(args) -> None:
    catalog = build_catalog(args.panos)
    cfg = ServeConfig(
        n_envs=args.n_envs, env=_env_config(args), hide_state=args.hide_state,
        workers=args.workers,
    )
    if args.episodes:
        source = FileEpisodeSource(args.episodes, args.n_envs)
    else:
        source = SamplerEpisodeSource(
            catalog.ids(), args.fov, args.seed, args.n_envs,
            difficulties=args.difficulties.split(","),
        )
    server = EnvServer(catalog.loader(), source, cfg)
    if args.stdio:
        server.serve_stdio()
    else:
        print(f"serving {args.n_envs} envs on {args.host}:{args.port}", file=sys.stderr)
        server.serve_tcp(args.host, args.port)


def _episode_files_by_label(paths: list[str]) -> dict[str, Path]:
    files = {}
    for p in paths:
        label, _, rest = p.partition("=")
        if rest:
            files[label] = Path(rest)
        else:
            files[Path(p).stem] = Path(p)
    return files


def _cmd_bench_run(args) -> None:
    catalog = build_catalog(args.panos)
    cfg = BenchConfig(
        agent=args.agent,
        episode_files=_episode_files_by_label(args.episodes),
        out_dir=Path(args.out),
        corruptions=[_parse_corruption(c) for c in args.corruption],
        env=_env_config(args),
    )
    rows = run_benchmark(cfg, catalog.loader())
    print((Path(args.out) / "results.txt").read_text(), end="")
    print(f"results in {args.out}")


def _cmd_bench_grid(args) -> None:
    from .agents import RuleAgentConfig, RuleBasedAgent

    catalog = build_catalog(args.panos)
    grid = [math.inf if g == "inf" else float(g) for g in args.grid.split(",")]
    episodes = {
        label: load_episode_file(path)
        for label, path in _episode_files_by_label(args.episodes).items()
    }
    result = param_search(
        lambda d: RuleBasedAgent(RuleAgentConfig(d_thresh=d)),
        episodes,
        catalog.loader(),
        grid=grid,
        env_cfg=_env_config(args),
        out_dir=args.out,
    )
    for difficulty, row in result.table.items():
        cells = "  ".join(
            f"{('inf' if math.isinf(d) else int(d))}:{eps:.2f}" for d, eps in row.items()
        )
        best = result.argmin[difficulty]
        best_s = "inf" if math.isinf(best) else f"{best:g}"
        print(f"{difficulty:8s} {cells}  -> best d_thresh {best_s}")


def _cmd_bench_fps(args) -> None:
    catalog = build_catalog(args.panos)
    specs = load_episode_file(args.episodes[0])
    agent = agent_factory_from_spec(args.agent)()
    fps = measure_fps(agent, specs, catalog.loader(), _env_config(args), warmup=args.warmup)
    print(f"{args.agent}: {fps:.2f} FPS")


def _add_env_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fov", type=float, default=90.0)
    p.add_argument("--obs-size", type=_size, default=(256, 256), metavar="WxH")
    p.add_argument("--max-steps", type=int, default=5000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lookaround")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a perspective view from a panorama")
    p.add_argument("--pano", required=True)
    p.add_argument("--pitch", type=float, required=True)
    p.add_argument("--yaw", type=float, required=True)
    p.add_argument("--fov", type=float, required=True)
    p.add_argument("--size", type=_size, required=True, metavar="WxH")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("corrupt", help="apply a corruption to an image")
    p.add_argument("--in", required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in CorruptionKind])
    p.add_argument("--severity", type=int, required=True, choices=range(1, 6))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("synth", help="generate a synthetic panorama")
    p.add_argument("--kind", default="grid-tags",
                   choices=["voronoi", "fractal-noise", "grid-tags"])
    p.add_argument("--size", type=_size, default=(1024, 512), metavar="WxH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("episodes", help="generate a deterministic episode file")
    p.add_argument("--panos", required=True, help="panorama directory")
    p.add_argument("--difficulty", required=True, choices=["easy", "medium", "hard"])
    p.add_argument("--n-per-pano", type=int, default=10)
    p.add_argument("--fov", type=float, default=90.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corruption", help="kind:severity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_episodes)

    p = sub.add_parser("serve", help="serve environments over the wire protocol")
    p.add_argument("--panos", required=True)
    p.add_argument("--episodes", help="episode file (default: sampler)")
    p.add_argument("--difficulties", default="easy")
    p.add_argument("--n-envs", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7447)
    p.add_argument("--stdio", action="store_true")
    p.add_argument("--hide-state", action="store_true")
    p.add_argument("--workers", type=int, default=4)
    _add_env_args(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("bench", help="benchmark harness")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)

    b = bench_sub.add_parser("run", help="run an agent over episode sets")
    b.add_argument("--agent", required=True)
    b.add_argument("--episodes", nargs="+", required=True, metavar="[LABEL=]FILE")
    b.add_argument("--corruption", nargs="*", default=[], metavar="KIND:SEV")
    b.add_argument("--panos", required=True)
    b.add_argument("--out", required=True)
    _add_env_args(b)
    b.set_defaults(func=_cmd_bench_run)

    b = bench_sub.add_parser("grid", help="distance-threshold grid search")
    b.add_argument("--grid", default=",".join(
        ["10", "20", "30", "40", "50", "60", "70", "80", "90", "100", "inf"]))
    b.add_argument("--episodes", nargs="+", required=True, metavar="[LABEL=]FILE")
    b.add_argument("--panos", required=True)
    b.add_argument("--out", default=None)
    _add_env_args(b)
    b.set_defaults(func=_cmd_bench_grid)

    b = bench_sub.add_parser("fps", help="measure agent frames per second")
    b.add_argument("--agent", required=True)
    b.add_argument("--episodes", nargs="+", required=True)
    b.add_argument("--panos", required=True)
    b.add_argument("--warmup", type=int, default=1)
    _add_env_args(b)
    b.set_defaults(func=_cmd_bench_fps)

    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()

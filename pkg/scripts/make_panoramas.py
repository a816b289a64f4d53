#!/usr/bin/env python3
"""Generate a synthetic panorama set with a manifest and train/val/test split."""

import argparse
from pathlib import Path

import cv2

from lookaround.dataset import SplitSpec, build_catalog, split, synth_panorama


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--n", type=int, default=12)
    ap.add_argument("--kind", default="grid-tags",
                    choices=["grid-tags", "voronoi", "fractal-noise"])
    ap.add_argument("--width", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for i in range(args.n):
        pano = synth_panorama(args.kind, args.width, args.width // 2, args.seed + i)
        path = args.out / f"{args.kind}-{i:04d}.png"
        cv2.imwrite(str(path), pano.pixels[:, :, ::-1])
        print(f"wrote {path}")

    catalog = build_catalog(args.out)
    catalog.save_manifest(args.out / "manifest.tsv")
    train, val, test = split(catalog, SplitSpec((0.8, 0.1, 0.1), seed=args.seed))
    for name, part in (("train", train), ("val", val), ("test", test)):
        part.save_manifest(args.out / f"{name}.tsv")
        print(f"{name}: {len(part)} panoramas")


if __name__ == "__main__":
    main()

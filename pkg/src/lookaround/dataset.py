"""Panorama ingestion, splits, episode-set generation, synthetic panoramas.

Synthetic panoramas make the whole pipeline testable without any licensed
panorama data: they are seeded, wrap correctly across the yaw seam, and the
grid-tags kind is dense enough in corners that feature detectors find
hundreds of keypoints in any view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import cv2
import numpy as np

from .corruptions import CorruptionSpec
from .environment import Difficulty, EpisodeSpec, sample_episode
from .projection import EquirectImage

__all__ = [
    "CatalogEntry",
    "PanoramaCatalog",
    "SplitSpec",
    "build_catalog",
    "generate_episode_set",
    "load_manifest",
    "split",
    "synth_panorama",
]

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    path: str
    width: int
    height: int
    scene: str


@dataclass
class PanoramaCatalog:
    entries: list[CatalogEntry]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate panorama ids in catalog")

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def load(self, pano_id: str) -> EquirectImage:
        entry = next((e for e in self.entries if e.id == pano_id), None)
        if entry is None:
            raise KeyError(pano_id)
        return _load_equirect(entry.path)

    def loader(self):
        """Panorama provider suitable for LookAroundEnv (caches decodes)."""
        by_id = {e.id: e.path for e in self.entries}

        @lru_cache(maxsize=64)
        def lookup(pano_id: str) -> EquirectImage:
            return _load_equirect(by_id[pano_id])

        return lookup

    def save_manifest(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for e in self.entries:
                f.write(f"{e.id}\t{e.path}\t{e.scene}\n")


def _load_equirect(path: str | Path) -> EquirectImage:
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise IOError(f"cannot decode image: {path}")
    return EquirectImage(np.ascontiguousarray(bgr[:, :, ::-1]))


def load_manifest(path: str | Path) -> PanoramaCatalog:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            pano_id, pano_path, scene = line.split("\t")
            h, w = _image_size(pano_path)
            entries.append(CatalogEntry(pano_id, pano_path, w, h, scene))
    return PanoramaCatalog(entries)


def _image_size(path: str | Path) -> tuple[int, int]:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IOError(f"cannot decode image: {path}")
    return img.shape[0], img.shape[1]


def build_catalog(directory: str | Path, scene: str = "synthetic") -> PanoramaCatalog:
    """Catalog every decodable 2:1 image in a directory, sorted by id."""
    directory = Path(directory)
    files = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    )
    if not files:
        raise FileNotFoundError(f"no panorama images in {directory}")
    entries, warnings = [], []
    for p in files:
        try:
            h, w = _image_size(p)
        except IOError:
            warnings.append(f"{p.name}: not decodable")
            continue
        if w != 2 * h:
            warnings.append(f"{p.name}: {w}x{h} is not 2:1, excluded")
            continue
        entries.append(CatalogEntry(p.stem, str(p), w, h, scene))
    return PanoramaCatalog(entries, warnings)


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self) -> None:
        if any(r <= 0 for r in self.ratios) or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("ratios must be positive and sum to 1")


def split(
    catalog: PanoramaCatalog, spec: SplitSpec
) -> tuple[PanoramaCatalog, PanoramaCatalog, PanoramaCatalog]:
    """Seeded per-panorama train/val/test partition: disjoint and covering."""
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(catalog.entries))
    n = len(order)
    c1 = int(round(spec.ratios[0] * n))
    c2 = int(round((spec.ratios[0] + spec.ratios[1]) * n))
    parts = (order[:c1], order[c1:c2], order[c2:])
    return tuple(
        PanoramaCatalog(sorted((catalog.entries[i] for i in idx), key=lambda e: e.id))
        for idx in parts
    )


def generate_episode_set(
    catalog: PanoramaCatalog,
    difficulty: Difficulty | str,
    n_per_pano: int,
    fov_deg: float,
    seed: int,
    corruption: tuple[str, int] | None = None,
    pitch_bound: int = 60,
    n_min: int = 10,
) -> list[EpisodeSpec]:
    """Deterministic episode set; every record satisfies the requested difficulty."""
    specs = []
    for pano_index, entry in enumerate(catalog.entries):
        rng = np.random.default_rng(np.random.SeedSequence([seed, pano_index]))
        for _ in range(n_per_pano):
            spec = sample_episode(
                difficulty, entry.id, fov_deg, rng,
                pitch_bound=pitch_bound, n_min=n_min,
            )
            if corruption is not None:
                kind, severity = corruption
                spec = EpisodeSpec(
                    pano=spec.pano, initial=spec.initial, target=spec.target,
                    difficulty=spec.difficulty, fov_deg=spec.fov_deg,
                    corruption=CorruptionSpec(kind, severity, spec.seed),
                    seed=spec.seed,
                )
            specs.append(spec)
    return specs


# --- synthetic panoramas ------------------------------------------------------

def synth_panorama(kind: str, width: int, height: int, seed: int) -> EquirectImage:
    """Seeded synthetic 2:1 panorama: 'voronoi', 'fractal-noise', or 'grid-tags'."""
    if width != 2 * height:
        raise ValueError(f"bad aspect: {width}x{height} is not 2:1")
    rng = np.random.default_rng(np.random.SeedSequence([hash(kind) & 0x7FFFFFFF, seed]))
    if kind == "voronoi":
        px = _voronoi(width, height, rng)
    elif kind == "fractal-noise":
        px = _fractal(width, height, rng)
    elif kind == "grid-tags":
        px = _grid_tags(width, height, rng)
    else:
        raise ValueError(f"unknown synthetic panorama kind: {kind}")
    return EquirectImage(px)


def _voronoi(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    n_sites = max(24, (width * height) // 4096)
    sx = rng.uniform(0, width, n_sites)
    sy = rng.uniform(0, height, n_sites)
    colors = rng.integers(30, 226, (n_sites, 3))
    xs = np.arange(width)[None, :]
    ys = np.arange(height)[:, None]
    best = np.full((height, width), np.inf)
    label = np.zeros((height, width), np.intp)
    for i in range(n_sites):
        dx = np.abs(xs - sx[i])
        dx = np.minimum(dx, width - dx)  # wrap across the yaw seam
        d = dx * dx + (ys - sy[i]) ** 2
        closer = d < best
        best[closer] = d[closer]
        label[closer] = i
    img = colors[label].astype(np.float64)
    # speckle the cells so views inside one cell are still distinguishable
    img += rng.normal(0, 14, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def _fractal(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    f = np.sqrt(fx * fx + fy * fy)
    f[0, 0] = 1.0
    img = np.zeros((height, width, 3))
    for c in range(3):
        spectrum = rng.normal(size=(height, width)) + 1j * rng.normal(size=(height, width))
        band = np.fft.ifft2(spectrum / f**1.9).real
        band -= band.min()
        img[:, :, c] = band / (band.max() or 1.0)
    return (img * 255).astype(np.uint8)


def _grid_tags(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    """Dense unique high-contrast tags on a fractal backdrop.

    Cell patterns are independent draws, so no two regions of the panorama
    look alike, and each tag is a block pattern full of corners.
    """
    img = (_fractal(width, height, rng) * 0.35 + 78).astype(np.float64)
    cell = max(16, width // 48)
    pattern_n = 6
    cols = width // cell
    rows = height // cell
    pad = max(2, cell // 10)
    inner = cell - 2 * pad
    for r in range(rows):
        for c in range(cols):
            pattern = rng.integers(0, 2, (pattern_n, pattern_n))
            fg = rng.integers(130, 256, 3).astype(np.float64)
            bg = rng.integers(0, 90, 3).astype(np.float64)
            tile = np.where(pattern[:, :, None] > 0, fg[None, None], bg[None, None])
            tile = cv2.resize(tile, (inner, inner), interpolation=cv2.INTER_NEAREST)
            y0 = r * cell + pad
            x0 = c * cell + pad
            img[y0 : y0 + inner, x0 : x0 + inner] = tile
    return np.clip(img, 0, 255).astype(np.uint8)

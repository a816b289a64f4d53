"""Built-in corner detector and binary descriptor pipeline.

FAST-9 segment-test corners with non-max suppression, ranked by Harris
response (top 1000 kept), oriented by the patch intensity centroid, and
described by a steered 256-bit binary test pattern. The point-pair pattern is
fixed and ships with the package (data/descriptor_pattern.json). Matching is
Hamming with a two-nearest-neighbor ratio test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import cv2
import numpy as np

__all__ = [
    "Keypoint",
    "Match",
    "detect_and_compute",
    "hamming_distance",
    "hamming_matrix",
    "knn_ratio_match",
]

FAST_RADIUS = 3
FAST_ARC = 9
PATCH_MARGIN = 25          # rotated pattern reach (15*sqrt(2)) + smoothing window
ORIENTATION_RADIUS = 15
N_ROTATION_BINS = 30       # descriptor steering granularity: 12 degrees

# Bresenham circle of radius 3, clockwise from 12 o'clock: (dx, dy)
_CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    angle_deg: float
    response: float


@dataclass(frozen=True)
class Match:
    current_index: int
    target_index: int
    distance: float


def _load_pattern() -> np.ndarray:
    text = resources.files("lookaround").joinpath("data/descriptor_pattern.json").read_text()
    return np.asarray(json.loads(text), dtype=np.int64)


_PATTERN = _load_pattern()  # (256, 4): x1, y1, x2, y2


def _rotated_patterns() -> np.ndarray:
    """Integer pattern offsets per steering bin, shape (bins, 256, 4)."""
    out = np.empty((N_ROTATION_BINS, 256, 4), dtype=np.int64)
    x1, y1, x2, y2 = (_PATTERN[:, i].astype(np.float64) for i in range(4))
    for b in range(N_ROTATION_BINS):
        t = np.radians(b * 360.0 / N_ROTATION_BINS)
        c, s = np.cos(t), np.sin(t)
        out[b, :, 0] = np.rint(x1 * c - y1 * s)
        out[b, :, 1] = np.rint(x1 * s + y1 * c)
        out[b, :, 2] = np.rint(x2 * c - y2 * s)
        out[b, :, 3] = np.rint(x2 * s + y2 * c)
    return out


_ROTATED = _rotated_patterns()


def _orientation_disk() -> tuple[np.ndarray, np.ndarray]:
    r = ORIENTATION_RADIUS
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    inside = dx * dx + dy * dy <= r * r
    return dx[inside].astype(np.int32), dy[inside].astype(np.int32)


_DISK_DX, _DISK_DY = _orientation_disk()


@lru_cache(maxsize=8)
def _flat_offsets(width: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-major flattened gather offsets for a given image width."""
    disk = (_DISK_DY * width + _DISK_DX).astype(np.int32)
    p1 = (_ROTATED[:, :, 1] * width + _ROTATED[:, :, 0]).astype(np.int32)
    p2 = (_ROTATED[:, :, 3] * width + _ROTATED[:, :, 2]).astype(np.int32)
    return disk, p1, p2


def _arc_table() -> np.ndarray:
    """For every 16-bit ring mask: does it contain a circular run >= FAST_ARC?"""
    bits = np.unpackbits(
        np.arange(65536, dtype=np.uint16).view(np.uint8).reshape(-1, 2)[:, ::-1], axis=1
    ).astype(bool)
    tiled = np.concatenate([bits, bits[:, : FAST_ARC - 1]], axis=1)
    csum = np.concatenate(
        [np.zeros((65536, 1), np.int16), np.cumsum(tiled, axis=1, dtype=np.int16)], axis=1
    )
    windows = csum[:, FAST_ARC:] - csum[:, :-FAST_ARC]
    return (windows == FAST_ARC).any(axis=1)


_HAS_ARC = _arc_table()


def _fast_corners(gray: np.ndarray, threshold: int) -> np.ndarray:
    """Boolean corner mask (same shape as gray) from the FAST-9 segment test."""
    h, w = gray.shape
    mask = np.zeros((h, w), dtype=bool)
    if h <= 2 * FAST_RADIUS or w <= 2 * FAST_RADIUS:
        return mask
    img = gray.astype(np.int16)
    r = FAST_RADIUS
    center = img[r : h - r, r : w - r]
    hi = center + threshold
    lo = center - threshold
    bright_bits = np.zeros(center.shape, dtype=np.uint16)
    dark_bits = np.zeros(center.shape, dtype=np.uint16)
    for k, (dx, dy) in enumerate(_CIRCLE):
        ring = img[r + dy : h - r + dy, r + dx : w - r + dx]
        bright_bits |= (ring > hi).astype(np.uint16) << k
        dark_bits |= (ring < lo).astype(np.uint16) << k
    mask[r : h - r, r : w - r] = _HAS_ARC[bright_bits] | _HAS_ARC[dark_bits]
    return mask


def detect_and_compute(
    gray: np.ndarray,
    fast_threshold: int = 20,
    max_keypoints: int = 1000,
) -> tuple[list[Keypoint], np.ndarray]:
    """Keypoints and packed 256-bit descriptors of an 8-bit grayscale image.

    Deterministic; may return empty lists on featureless images.
    """
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ValueError("expected a single-channel uint8 image")
    h, w = gray.shape
    corner_mask = _fast_corners(gray, fast_threshold)
    # only keep corners whose full descriptor patch is inside the image
    corner_mask[:PATCH_MARGIN, :] = False
    corner_mask[h - PATCH_MARGIN :, :] = False
    corner_mask[:, :PATCH_MARGIN] = False
    corner_mask[:, w - PATCH_MARGIN :] = False
    if not corner_mask.any():
        return [], np.empty((0, 32), dtype=np.uint8)

    harris = cv2.cornerHarris(gray.astype(np.float32) / 255.0, 7, 3, 0.04)
    masked = np.where(corner_mask, harris, -np.inf).astype(np.float32)
    local_max = cv2.dilate(masked, np.ones((3, 3), np.uint8))
    keep = corner_mask & (masked >= local_max)
    ys, xs = np.nonzero(keep)
    resp = harris[ys, xs]

    order = np.lexsort((xs, ys, -resp))[:max_keypoints]
    ys, xs, resp = ys[order], xs[order], resp[order]

    disk_off, p1_off, p2_off = _flat_offsets(w)
    base = (ys * w + xs).astype(np.int32)
    flat = gray.astype(np.float32).ravel()
    patches = flat[base[:, None] + disk_off[None, :]]
    m10 = patches @ _DISK_DX.astype(np.float32)
    m01 = patches @ _DISK_DY.astype(np.float32)
    angles = np.degrees(np.arctan2(m01, m10))

    smoothed = cv2.blur(gray, (5, 5)).astype(np.float32).ravel()
    bins = np.mod(np.rint(angles / (360.0 / N_ROTATION_BINS)).astype(np.int64), N_ROTATION_BINS)
    bits = smoothed[base[:, None] + p1_off[bins]] < smoothed[base[:, None] + p2_off[bins]]
    descriptors = np.packbits(bits, axis=1)

    keypoints = [
        Keypoint(float(x), float(y), float(a), float(r))
        for x, y, a, r in zip(xs, ys, angles, resp)
    ]
    return keypoints, descriptors


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Bit distance between two packed descriptors."""
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs Hamming distances between packed descriptor rows.

    Accumulates per 64-bit word to avoid materializing the (Ka, Kb, words)
    intermediate.
    """
    a64 = np.ascontiguousarray(a).view(np.uint64)
    b64 = np.ascontiguousarray(b).view(np.uint64)
    acc = np.zeros((a64.shape[0], b64.shape[0]), np.uint16)
    for word in range(a64.shape[1]):
        acc += np.bitwise_count(a64[:, None, word] ^ b64[None, :, word])
    return acc.astype(np.int32)


def knn_ratio_match(
    desc_current: np.ndarray,
    desc_target: np.ndarray,
    ratio: float = 0.7,
    metric: str = "hamming",
) -> list[Match]:
    """Two-nearest-neighbor matches passing the ratio test.

    Needs at least two target descriptors (the second neighbor is the test);
    fewer yield no matches.
    """
    if len(desc_current) == 0 or len(desc_target) < 2:
        return []
    if metric == "hamming":
        d = hamming_matrix(desc_current, desc_target)
    elif metric == "l2":
        a = desc_current.astype(np.float64)
        b = desc_target.astype(np.float64)
        d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    two = np.argpartition(d, 1, axis=1)[:, :2]
    rows = np.arange(d.shape[0])
    pair = d[rows[:, None], two]
    swap = pair[:, 0] > pair[:, 1]
    two[swap] = two[swap][:, ::-1]
    pair[swap] = pair[swap][:, ::-1]
    ok = pair[:, 0] < ratio * pair[:, 1]
    return [
        Match(int(i), int(two[i, 0]), float(pair[i, 0]))
        for i in np.nonzero(ok)[0]
    ]

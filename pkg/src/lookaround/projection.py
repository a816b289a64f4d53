"""Perspective view rendering from equirectangular panoramas.

Conventions used throughout (fixed here once, everything else builds on them):

* Camera frame is right-handed: +x right, +y down (image rows grow downward),
  +z forward along the optical axis.
* A view rotation is (pitch, yaw) in degrees. Positive pitch looks up,
  positive yaw looks right. Pitch is applied about the camera's horizontal
  axis after yaw about the world vertical axis, so views never roll.
* Image-plane coordinates are continuous: pixel index i has its center at
  coordinate i + 0.5, and the principal point sits at (width/2, height/2).
  The horizontal field of view therefore spans exactly the [0, width]
  coordinate range.
* Equirectangular pixels have their centers at integer coordinates. Columns
  wrap around (the panorama is periodic in yaw); rows clamp at the poles.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache

import cv2
import numpy as np

__all__ = [
    "CameraIntrinsics",
    "EquirectImage",
    "PerspImage",
    "ViewRotation",
    "bilinear_sample",
    "make_intrinsics",
    "pixel_to_sphere",
    "render_batch",
    "render_perspective",
    "rotation_matrix",
    "sphere_to_equirect",
    "wrap_yaw",
]


def wrap_yaw(yaw: float) -> float:
    """Wrap a yaw angle into the canonical (-180, 180] range.

    Integer inputs stay integers.
    """
    return 180 - (180 - yaw) % 360


@dataclass(frozen=True)
class ViewRotation:
    """Viewing direction as (pitch, yaw) degrees in canonical form."""

    pitch: float
    yaw: float

    def __post_init__(self) -> None:
        if not -90 <= self.pitch <= 90:
            raise ValueError(f"pitch {self.pitch} outside [-90, 90]")
        if not -180 < self.yaw <= 180:
            raise ValueError(f"yaw {self.yaw} outside (-180, 180]; canonicalize first")

    @classmethod
    def canonical(cls, pitch: float, yaw: float) -> "ViewRotation":
        """Build a rotation, wrapping yaw into (-180, 180]."""
        return cls(pitch, wrap_yaw(yaw))


@dataclass(frozen=True)
class EquirectImage:
    """Full 360x180 panorama. RGB uint8, row-major, row 0 at the zenith."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("pixels must be an (H, W, 3) array")
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        h, w = px.shape[:2]
        if h < 1 or w != 2 * h:
            raise ValueError(f"panorama must be 2:1, got {w}x{h}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @cached_property
    def _pixels_f32(self) -> np.ndarray:
        # float source makes cv2.remap interpolate in float, not fixed point
        return self.pixels.astype(np.float32)


@dataclass(frozen=True)
class PerspImage:
    """Rendered perspective view. RGB uint8, row-major."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("pixels must be an (H, W, 3) array")
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics of the virtual perspective camera.

    The focal length is always derived from the horizontal FoV, never stored,
    so it cannot go stale.
    """

    fov_deg: float
    width: int
    height: int

    @property
    def focal(self) -> float:
        """Focal length in pixels: width / (2 tan(fov/2))."""
        return self.width / (2.0 * math.tan(math.radians(self.fov_deg) / 2.0))


def make_intrinsics(fov_deg: float, width: int, height: int) -> CameraIntrinsics:
    """Validate and build camera intrinsics.

    The principal point is the image center (width/2, height/2).
    """
    if not 0 < fov_deg < 180:
        raise ValueError(f"invalid fov: {fov_deg} not in (0, 180)")
    if width < 1 or height < 1:
        raise ValueError(f"invalid size: {width}x{height}")
    return CameraIntrinsics(float(fov_deg), int(width), int(height))


def rotation_matrix(rot: ViewRotation) -> np.ndarray:
    """World-from-camera rotation: yaw about the vertical axis composed with
    pitch about the rotated horizontal axis. Produces zero roll."""
    t = math.radians(rot.pitch)
    y = math.radians(rot.yaw)
    ct, st = math.cos(t), math.sin(t)
    cy, sy = math.cos(y), math.sin(y)
    r_pitch = np.array([[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]])
    r_yaw = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    return r_yaw @ r_pitch


def pixel_to_sphere(
    v: tuple[float, float], cam: CameraIntrinsics, rot: ViewRotation
) -> tuple[float, float]:
    """Yaw and pitch (degrees) of the ray through image-plane point ``v``.

    ``v`` is in continuous image-plane coordinates (see module docstring), so
    the exact image center (width/2, height/2) maps to (rot.yaw, rot.pitch).
    The yaw uses the full-quadrant arctangent.
    """
    vi, vj = v
    f = cam.focal
    ray = np.array([(vi - cam.width / 2.0) / f, (vj - cam.height / 2.0) / f, 1.0])
    p = rotation_matrix(rot) @ ray
    p /= math.sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    alpha = math.degrees(math.atan2(p[0], p[2]))
    beta = math.degrees(math.asin(p[1]))
    return alpha, -beta


def sphere_to_equirect(
    alpha_deg: float, beta_deg: float, equi_width: int, equi_height: int
) -> tuple[float, float]:
    """Fractional panorama coordinates for the direction (alpha, beta).

    ``beta`` here is row-aligned: -90 maps to the top row (zenith), +90 to the
    bottom. A ViewRotation pitch must be negated before calling. ``u_i`` is
    reduced modulo the panorama width.
    """
    a = math.radians(alpha_deg)
    b = math.radians(beta_deg)
    u_i = (a + math.pi) * (equi_width / (2.0 * math.pi)) % equi_width
    u_j = (b + math.pi / 2.0) * (equi_height / math.pi)
    return u_i, u_j


def bilinear_sample(img: EquirectImage, u: tuple[float, float]) -> np.ndarray:
    """Bilinear RGB sample at fractional (u_i, u_j); float64 result.

    Horizontal neighbors wrap modulo the width, vertical neighbors clamp at
    the top and bottom rows.
    """
    rgb = _sample_equirect(
        img.pixels, np.asarray([u[0]], dtype=np.float64), np.asarray([u[1]], dtype=np.float64)
    )
    return rgb[0]


def _sample_equirect(pixels: np.ndarray, u_i: np.ndarray, u_j: np.ndarray) -> np.ndarray:
    h, w = pixels.shape[:2]
    u_j = np.clip(u_j, 0.0, float(h - 1))
    j0 = np.floor(u_j)
    fy = u_j - j0
    j0 = j0.astype(np.intp)
    j1 = np.minimum(j0 + 1, h - 1)
    i0f = np.floor(u_i)
    fx = u_i - i0f
    i0 = (i0f.astype(np.int64) % w).astype(np.intp)
    i1 = ((i0 + 1) % w).astype(np.intp)

    flat = np.ascontiguousarray(pixels).reshape(-1, 3)
    row0 = j0 * w
    row1 = j1 * w
    p00 = flat[row0 + i0].astype(np.float64)
    p01 = flat[row0 + i1].astype(np.float64)
    p10 = flat[row1 + i0].astype(np.float64)
    p11 = flat[row1 + i1].astype(np.float64)
    fx = fx[:, None]
    fy = fy[:, None]
    top = p00 * (1.0 - fx) + p01 * fx
    bottom = p10 * (1.0 - fx) + p11 * fx
    return top * (1.0 - fy) + bottom * fy


@lru_cache(maxsize=32)
def _ray_grid(fov_deg: float, width: int, height: int) -> np.ndarray:
    """Unit rays through every pixel center at identity rotation, shape (3, W*H)."""
    f = CameraIntrinsics(fov_deg, width, height).focal
    xs = (np.arange(width, dtype=np.float64) + 0.5 - width / 2.0) / f
    ys = (np.arange(height, dtype=np.float64) + 0.5 - height / 2.0) / f
    gx, gy = np.meshgrid(xs, ys)
    rays = np.stack([gx, gy, np.ones_like(gx)], axis=0).reshape(3, -1)
    rays /= np.linalg.norm(rays, axis=0, keepdims=True)
    return rays


def render_perspective(
    img: EquirectImage, rot: ViewRotation, cam: CameraIntrinsics
) -> PerspImage:
    """Render the perspective view of ``img`` at rotation ``rot``.

    Pure and deterministic: identical inputs give byte-identical output. The
    source-coordinate maps are computed in float64 and sampled in float32;
    this stays within one intensity level of the exact float64 result.
    """
    if not 0 < cam.fov_deg < 180:
        raise ValueError(f"invalid fov: {cam.fov_deg} not in (0, 180)")
    rays = _ray_grid(cam.fov_deg, cam.width, cam.height)
    p = rotation_matrix(rot) @ rays
    alpha = np.arctan2(p[0], p[2])
    beta = np.arcsin(np.clip(p[1], -1.0, 1.0))
    w, h = img.width, img.height
    u_i = (alpha + np.pi) * (w / (2.0 * np.pi)) % w
    u_j = np.clip((beta + np.pi / 2.0) * (h / np.pi), 0.0, float(h - 1))
    map_i = u_i.astype(np.float32).reshape(cam.height, cam.width)
    map_j = u_j.astype(np.float32).reshape(cam.height, cam.width)
    rgb = cv2.remap(
        img._pixels_f32, map_i, map_j, cv2.INTER_LINEAR, borderMode=cv2.BORDER_WRAP
    )
    return PerspImage(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))


def render_batch(
    imgs: list[EquirectImage],
    rots: list[ViewRotation],
    cam: CameraIntrinsics,
    max_workers: int | None = None,
) -> list[PerspImage]:
    """Render many (panorama, rotation) pairs with shared intrinsics.

    Elementwise identical to render_perspective; output order matches input
    order regardless of execution order.
    """
    if len(imgs) != len(rots):
        raise ValueError(f"length mismatch: {len(imgs)} panoramas vs {len(rots)} rotations")
    if len(imgs) <= 1:
        return [render_perspective(i, r, cam) for i, r in zip(imgs, rots)]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(render_perspective, imgs, rots, [cam] * len(imgs)))

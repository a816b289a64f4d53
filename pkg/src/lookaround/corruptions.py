"""Natural image corruptions: 4 blurs, 4 noise models, 4 digital, 4 weather.

Every kind is deterministic given (image, kind, severity, seed); stochastic
kinds draw exclusively from a generator seeded per call. Per-severity
parameters live in data/corruption_params.json and were tuned so the mean
absolute deviation from the clean image grows strictly with severity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import cv2
import numpy as np

__all__ = [
    "CATEGORIES",
    "CorruptionKind",
    "CorruptionSpec",
    "corrupt",
    "severity_params",
]


class CorruptionKind(str, Enum):
    MOTION_BLUR = "motion-blur"
    DEFOCUS_BLUR = "defocus-blur"
    GLASS_BLUR = "glass-blur"
    GAUSSIAN_BLUR = "gaussian-blur"
    GAUSSIAN_NOISE = "gaussian-noise"
    IMPULSE_NOISE = "impulse-noise"
    SHOT_NOISE = "shot-noise"
    SPECKLE_NOISE = "speckle-noise"
    BRIGHTNESS = "brightness"
    CONTRAST = "contrast"
    SATURATION = "saturation"
    JPEG_COMPRESSION = "jpeg-compression"
    SNOW = "snow"
    SPATTER = "spatter"
    FOG = "fog"
    FROST = "frost"


CATEGORIES: dict[str, tuple[CorruptionKind, ...]] = {
    "blur": (
        CorruptionKind.MOTION_BLUR,
        CorruptionKind.DEFOCUS_BLUR,
        CorruptionKind.GLASS_BLUR,
        CorruptionKind.GAUSSIAN_BLUR,
    ),
    "noise": (
        CorruptionKind.GAUSSIAN_NOISE,
        CorruptionKind.IMPULSE_NOISE,
        CorruptionKind.SHOT_NOISE,
        CorruptionKind.SPECKLE_NOISE,
    ),
    "digital": (
        CorruptionKind.BRIGHTNESS,
        CorruptionKind.CONTRAST,
        CorruptionKind.SATURATION,
        CorruptionKind.JPEG_COMPRESSION,
    ),
    "weather": (
        CorruptionKind.SNOW,
        CorruptionKind.SPATTER,
        CorruptionKind.FOG,
        CorruptionKind.FROST,
    ),
}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: CorruptionKind
    severity: int
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CorruptionKind(self.kind))
        if self.severity not in (1, 2, 3, 4, 5):
            raise ValueError(f"invalid severity {self.severity}: must be 1-5")


def _load_params() -> dict:
    text = resources.files("lookaround").joinpath("data/corruption_params.json").read_text()
    return json.loads(text)


_PARAMS = _load_params()


def severity_params(kind: CorruptionKind | str, severity: int) -> dict:
    """Parameter record for (kind, severity); total over the 16x5 grid."""
    kind = CorruptionKind(kind)
    if severity not in (1, 2, 3, 4, 5):
        raise ValueError(f"invalid severity {severity}: must be 1-5")
    return dict(_PARAMS[kind.value][severity - 1])


def corrupt(img: np.ndarray, spec: CorruptionSpec) -> np.ndarray:
    """Apply a corruption to an (H, W, 3) uint8 RGB image; same shape out."""
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 image")
    spec = CorruptionSpec(spec.kind, spec.severity, spec.seed)
    params = severity_params(spec.kind, spec.severity)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, spec.severity]))
    x = img.astype(np.float64) / 255.0
    out = _DISPATCH[spec.kind](x, rng, **params)
    return np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)


# --- blur -------------------------------------------------------------------

def _motion_blur(x, rng, length, angle_jitter):
    angle = rng.uniform(-angle_jitter, angle_jitter) + 45.0
    k = int(length)
    kernel = np.zeros((k, k), np.float64)
    c = (k - 1) / 2.0
    t = np.radians(angle)
    for s in np.linspace(-c, c, 4 * k):
        i = int(round(c + s * np.sin(t)))
        j = int(round(c + s * np.cos(t)))
        kernel[i, j] = 1.0
    kernel /= kernel.sum()
    return cv2.filter2D(x, -1, kernel, borderType=cv2.BORDER_REFLECT)


def _disk_kernel(radius):
    r = int(np.ceil(radius))
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    k = (xx * xx + yy * yy <= radius * radius).astype(np.float64)
    return k / k.sum()


def _defocus_blur(x, rng, radius):
    return cv2.filter2D(x, -1, _disk_kernel(radius), borderType=cv2.BORDER_REFLECT)


def _glass_blur(x, rng, sigma, max_shift, iterations):
    h, w = x.shape[:2]
    out = cv2.GaussianBlur(x, (0, 0), sigma, borderType=cv2.BORDER_REFLECT)
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    for _ in range(int(iterations)):
        dy = rng.integers(-max_shift, max_shift + 1, size=(h, w))
        dx = rng.integers(-max_shift, max_shift + 1, size=(h, w))
        sy = np.clip(rows + dy, 0, h - 1)
        sx = np.clip(cols + dx, 0, w - 1)
        out = out[sy, sx]
    return cv2.GaussianBlur(out, (0, 0), sigma, borderType=cv2.BORDER_REFLECT)


def _gaussian_blur(x, rng, sigma):
    return cv2.GaussianBlur(x, (0, 0), sigma, borderType=cv2.BORDER_REFLECT)


# --- noise ------------------------------------------------------------------

def _gaussian_noise(x, rng, sigma):
    return x + rng.normal(0.0, sigma, x.shape)


def _impulse_noise(x, rng, amount):
    out = x.copy()
    mask = rng.random(x.shape[:2]) < amount
    salt = rng.random(x.shape[:2]) < 0.5
    out[mask & salt] = 1.0
    out[mask & ~salt] = 0.0
    return out


def _shot_noise(x, rng, photons):
    return rng.poisson(x * photons) / photons


def _speckle_noise(x, rng, sigma):
    return x * (1.0 + rng.normal(0.0, sigma, x.shape))


# --- digital ----------------------------------------------------------------

def _brightness(x, rng, shift):
    return x + shift


def _contrast(x, rng, factor):
    mean = x.mean(axis=(0, 1), keepdims=True)
    return (x - mean) * factor + mean


def _saturation(x, rng, factor):
    gray = x @ np.array([0.299, 0.587, 0.114])
    return gray[..., None] + (x - gray[..., None]) * factor


def _jpeg_compression(x, rng, quality):
    bgr = np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)[:, :, ::-1]
    ok, buf = cv2.imencode(".jpg", bgr, [int(cv2.IMWRITE_JPEG_QUALITY), int(quality)])
    if not ok:
        raise RuntimeError("jpeg encoding failed")
    return cv2.imdecode(buf, cv2.IMREAD_COLOR)[:, :, ::-1].astype(np.float64) / 255.0


# --- weather ----------------------------------------------------------------

def _plasma(h, w, rng, roughness=2.4):
    """Seeded cloud-like field in [0, 1] via spectral synthesis."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    f = np.sqrt(fx * fx + fy * fy)
    f[0, 0] = 1.0
    spectrum = rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))
    field = np.fft.ifft2(spectrum / f**roughness).real
    field -= field.min()
    ptp = field.max() - field.min()
    return field / ptp if ptp > 0 else field


def _snow(x, rng, amount, whiten, streak_len):
    h, w = x.shape[:2]
    flakes = rng.normal(0.0, 1.0, (h, w))
    layer = np.clip((flakes - (2.8 - amount)) * 2.0, 0.0, 1.0)
    k = int(streak_len)
    if k > 1:
        kernel = np.zeros((k, k), np.float64)
        c = (k - 1) / 2.0
        for s in np.linspace(-c, c, 4 * k):
            kernel[int(round(c + s * 0.7)), int(round(c + s * 0.7))] = 1.0
        kernel /= kernel.sum()
        layer = cv2.filter2D(layer, -1, kernel, borderType=cv2.BORDER_REFLECT)
        layer = np.clip(layer * 3.0, 0.0, 1.0)
    gray = x @ np.array([0.299, 0.587, 0.114])
    wash = np.maximum(x, (gray * 1.5 + 0.5)[..., None])
    out = x * (1.0 - whiten) + wash * whiten
    return np.clip(out + layer[..., None], 0.0, 1.0)


def _spatter(x, rng, coverage, blob_scale):
    h, w = x.shape[:2]
    field = _plasma(h, w, rng, roughness=blob_scale)
    thresh = np.quantile(field, 1.0 - coverage)
    mask = np.clip((field - thresh) * 8.0, 0.0, 1.0)[..., None]
    color = np.array([0.35, 0.42, 0.55])  # murky water
    return x * (1.0 - mask) + color * mask


def _fog(x, rng, weight):
    h, w = x.shape[:2]
    field = _plasma(h, w, rng)[..., None]
    fog_color = 0.85
    blend = weight * (0.4 + 0.6 * field)
    return x * (1.0 - blend) + fog_color * blend


def _frost(x, rng, weight, detail):
    h, w = x.shape[:2]
    # ridged fractal: crystalline vein structure, procedural (no photo assets)
    field = _plasma(h, w, rng, roughness=detail)
    ridges = 1.0 - np.abs(field * 2.0 - 1.0)
    crystals = np.clip(ridges**3 + 0.35 * _plasma(h, w, rng, roughness=1.6), 0.0, 1.0)
    tint = np.array([0.88, 0.93, 1.0])
    alpha = (weight * crystals)[..., None]
    return x * (1.0 - alpha) + tint * alpha


_DISPATCH = {
    CorruptionKind.MOTION_BLUR: _motion_blur,
    CorruptionKind.DEFOCUS_BLUR: _defocus_blur,
    CorruptionKind.GLASS_BLUR: _glass_blur,
    CorruptionKind.GAUSSIAN_BLUR: _gaussian_blur,
    CorruptionKind.GAUSSIAN_NOISE: _gaussian_noise,
    CorruptionKind.IMPULSE_NOISE: _impulse_noise,
    CorruptionKind.SHOT_NOISE: _shot_noise,
    CorruptionKind.SPECKLE_NOISE: _speckle_noise,
    CorruptionKind.BRIGHTNESS: _brightness,
    CorruptionKind.CONTRAST: _contrast,
    CorruptionKind.SATURATION: _saturation,
    CorruptionKind.JPEG_COMPRESSION: _jpeg_compression,
    CorruptionKind.SNOW: _snow,
    CorruptionKind.SPATTER: _spatter,
    CorruptionKind.FOG: _fog,
    CorruptionKind.FROST: _frost,
}

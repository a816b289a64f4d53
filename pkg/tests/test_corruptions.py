import numpy as np
import pytest

from lookaround.corruptions import (
    CATEGORIES,
    CorruptionKind,
    CorruptionSpec,
    corrupt,
    severity_params,
)

ALL_KINDS = list(CorruptionKind)


@pytest.fixture(scope="module")
def image():
    import cv2

    rng = np.random.default_rng(77)
    base = rng.random((12, 12, 3))
    img = cv2.resize(base, (96, 96), interpolation=cv2.INTER_CUBIC)
    return np.clip(img * 255, 0, 255).astype(np.uint8)


class TestKinds:
    def test_sixteen_kinds_in_four_categories(self):
        assert len(ALL_KINDS) == 16
        grouped = [k for kinds in CATEGORIES.values() for k in kinds]
        assert sorted(grouped) == sorted(ALL_KINDS)
        assert set(CATEGORIES) == {"blur", "noise", "digital", "weather"}
        assert all(len(v) == 4 for v in CATEGORIES.values())

    def test_spec_rejects_severity_zero(self):
        with pytest.raises(ValueError, match="severity"):
            CorruptionSpec("brightness", 0, 1)
        with pytest.raises(ValueError, match="severity"):
            CorruptionSpec("brightness", 6, 1)

    def test_spec_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            CorruptionSpec("vignette", 1, 1)


class TestSeverityParams:
    def test_total_over_grid(self):
        for kind in ALL_KINDS:
            for sev in range(1, 6):
                assert severity_params(kind, sev)

    def test_noise_sigma_monotone(self):
        sigmas = [severity_params("gaussian-noise", s)["sigma"] for s in range(1, 6)]
        assert sigmas == sorted(sigmas) and len(set(sigmas)) == 5

    def test_jpeg_quality_decreasing(self):
        qualities = [severity_params("jpeg-compression", s)["quality"] for s in range(1, 6)]
        assert qualities == sorted(qualities, reverse=True)

    def test_fog_weight_increasing(self):
        weights = [severity_params("fog", s)["weight"] for s in range(1, 6)]
        assert weights == sorted(weights) and len(set(weights)) == 5

    def test_invalid_severity(self):
        with pytest.raises(ValueError):
            severity_params("fog", 0)


class TestCorrupt:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_deterministic_and_shape_preserving(self, image, kind):
        spec = CorruptionSpec(kind, 3, seed=1234)
        a = corrupt(image, spec)
        b = corrupt(image, spec)
        assert np.array_equal(a, b)
        assert a.shape == image.shape and a.dtype == np.uint8

    @pytest.mark.parametrize("kind", [k for k in ALL_KINDS if k in CATEGORIES["noise"]])
    def test_seed_changes_noise(self, image, kind):
        a = corrupt(image, CorruptionSpec(kind, 3, seed=1))
        b = corrupt(image, CorruptionSpec(kind, 3, seed=2))
        assert not np.array_equal(a, b)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            corrupt(np.zeros((8, 8), np.uint8), CorruptionSpec("fog", 1, 0))

    def test_digital_low_severity_stays_close(self, image):
        for kind in CATEGORIES["digital"]:
            out = corrupt(image, CorruptionSpec(kind, 1, seed=5))
            mad = np.abs(out.astype(np.float64) - image).mean()
            assert mad <= 0.3 * 255, kind

    def test_every_kind_changes_the_image(self, image):
        for kind in ALL_KINDS:
            out = corrupt(image, CorruptionSpec(kind, 3, seed=5))
            assert np.abs(out.astype(int) - image.astype(int)).max() > 0, kind

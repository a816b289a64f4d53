import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lookaround.dataset import synth_panorama
from lookaround.projection import EquirectImage

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid_pano() -> EquirectImage:
    return synth_panorama("grid-tags", 1024, 512, seed=11)


@pytest.fixture(scope="session")
def noise_pano() -> EquirectImage:
    return synth_panorama("fractal-noise", 256, 128, seed=5)


@pytest.fixture(scope="session")
def random_small_pano() -> EquirectImage:
    rng = np.random.default_rng(123)
    return EquirectImage(rng.integers(0, 256, (64, 128, 3)).astype(np.uint8))

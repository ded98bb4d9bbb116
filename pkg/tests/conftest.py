import numpy as np
import pytest

from lumafuse import Image


def seeded_image(seed: int, h: int, w: int, lo: float = 0.0, hi: float = 1.0) -> Image:
    rng = np.random.default_rng(seed)
    return Image(rng.uniform(lo, hi, size=(h, w, 3)))


def smooth_image(seed: int, h: int, w: int, lo: float = 0.25, hi: float = 0.65) -> Image:
    """Mildly textured image comfortably away from the clamp boundaries."""
    from lumafuse import gaussian_blur

    rng = np.random.default_rng(seed)
    arr = gaussian_blur(rng.uniform(lo, hi, size=(h, w, 3)))
    return Image(np.clip(arr, lo, hi))


@pytest.fixture
def rng():
    return np.random.default_rng(7)

import numpy as np
import pytest

from polypseg.imagecore import RgbFrame


def random_frame(rng, width, height):
    return RgbFrame(rng.integers(0, 256, size=(height, width, 3)).astype(np.uint8))


def constant_frame(width, height, color=(120, 90, 80)):
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[:, :] = color
    return RgbFrame(px)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

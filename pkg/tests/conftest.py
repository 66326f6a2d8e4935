import numpy as np
import pytest

from regionattack import AttackConfig, Region, ToySegmenter, generate_synthetic_corpus


@pytest.fixture(scope="session")
def toy():
    return ToySegmenter()


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(4, seed=11)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_image(rng, h=12, w=10, c=3):
    return rng.random((h, w, c))


@pytest.fixture()
def fast_cfg():
    return AttackConfig(epsilon=8 / 255, steps=6)


def two_disk_image(h=40, w=48):
    """Two well-separated uniform disks on a distant background."""
    img = np.full((h, w, 3), 0.95)
    rows, cols = np.mgrid[0:h, 0:w]
    disk_a = (rows - 14) ** 2 + (cols - 14) ** 2 <= 64
    disk_b = (rows - 26) ** 2 + (cols - 34) ** 2 <= 49
    img[disk_a] = (0.2, 0.3, 0.4)
    img[disk_b] = (0.6, 0.1, 0.2)
    return img, disk_a, disk_b


@pytest.fixture()
def centered_region():
    return Region(top=10, left=10, height=12, width=12)

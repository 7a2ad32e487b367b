import numpy as np
import pytest

from patchaug.augment import LabeledExample
from patchaug.dataset import Dataset


def indexed_image(h, w, c=1, lo=0.0, hi=1.0):
    """Image whose channel-0 value encodes the flat pixel index.

    Values are injective and confined to [lo, hi), so patches copied out of
    this image can be located again from the output pixels alone.
    """
    idx = np.arange(h * w, dtype=np.float64).reshape(h, w)
    base = lo + (hi - lo) * idx / (h * w)
    img = np.empty((h, w, c), dtype=np.float64)
    for ch in range(c):
        img[:, :, ch] = base
    return img


def two_class_pair(h, w, c, rng):
    """Host/donor pair with provably disjoint pixel values.

    Host pixels live in [0, 0.4); donor pixels are injective in [0.6, 1.0),
    so any output pixel identifies its source image, and a donor pixel's
    value recovers its original (row, col) position.
    """
    host = LabeledExample(
        image=rng.uniform(0.0, 0.4, size=(h, w, c)),
        label=np.array([1.0, 0.0]),
    )
    donor = LabeledExample(
        image=indexed_image(h, w, c, lo=0.6, hi=1.0),
        label=np.array([0.0, 1.0]),
    )
    return host, donor


def tiny_dataset(n=12, h=6, w=5, c=3, k=3, seed=0):
    gen = np.random.default_rng(seed)
    images = gen.uniform(0.0, 1.0, size=(n, h, w, c)).astype(np.float32)
    labels = np.eye(k, dtype=np.float64)[np.arange(n) % k]
    return Dataset(images=images, labels=labels, num_classes=k, name="tiny")


@pytest.fixture
def np_rng():
    return np.random.default_rng(20260819)

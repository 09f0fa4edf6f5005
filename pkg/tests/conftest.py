"""Shared fixtures.

The VGG19 checkpoint is large, so it is generated once into a gitignored
cache directory and reused across sessions.  All tests run against the
same deterministic seed-0 checkpoint.
"""

import os

import numpy as np
import pytest

from imgfuse.backbone import load_backbone, save_initialised_checkpoint
from imgfuse.images import ImageTensor

CACHE_DIR = os.path.join(os.path.dirname(__file__), os.pardir, ".cache")
WEIGHTS_FILE = os.path.join(CACHE_DIR, "vgg19_seed0.pt")


@pytest.fixture(scope="session")
def weights_path():
    os.makedirs(CACHE_DIR, exist_ok=True)
    if not os.path.exists(WEIGHTS_FILE):
        save_initialised_checkpoint(WEIGHTS_FILE, seed=0)
    return WEIGHTS_FILE


@pytest.fixture(scope="session")
def handle(weights_path):
    return load_backbone(weights_path)


@pytest.fixture(scope="session")
def handle64(weights_path):
    """Double-precision backbone for finite-difference comparisons."""
    return load_backbone(weights_path, dtype="float64")


def random_image(rng, h=48, w=48, channels=1):
    return ImageTensor(rng.random((h, w, channels), dtype=np.float64).astype(np.float32))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)

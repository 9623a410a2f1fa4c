import os

import numpy as np
import pytest

# keep embedding training single-threaded and reproducible in the suite
os.environ.setdefault("FEATFORGE_THREADS", "1")

from featforge.corpus import Document  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def balanced_docs():
    return [Document(f"d{i:03d}", f"text {i}", i % 2) for i in range(100)]

from pathlib import Path

import pytest

from geoseek.embed import NgramEmbedder
from geoseek.rewards import RewardConfig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def provider():
    return NgramEmbedder(dimension=256)


@pytest.fixture(scope="session")
def cfg():
    return RewardConfig()


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR

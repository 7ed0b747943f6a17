import json
from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "roagp" / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def smib():
    from roagp.dynamics import build_smib

    return build_smib()


@pytest.fixture
def smib_run_config() -> dict:
    with open(DATA_DIR / "smib_run.json") as fh:
        return json.load(fh)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

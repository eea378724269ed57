import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = REPO_ROOT / "data" / "synthetic"

sys.path.insert(0, str(REPO_ROOT / "src"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    assert DATA_DIR.is_dir(), "bundled synthetic data missing; run demos/00_make_fixture_data.py"
    return DATA_DIR

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from hausdorff_core import Axis, load_spec  # noqa: E402

FIXTURES_DIR = ROOT / "fixtures"
FIXTURE_NAMES = ("cesaro1", "cesaro2", "cesaro3", "ck0.5", "ck1", "ck2", "ck3", "geometric", "identity")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture(scope="session")
def fixture_spec():
    cache = {}

    def load(name: str):
        if name not in cache:
            cache[name] = load_spec(FIXTURES_DIR / f"{name}.json")
        return cache[name]

    return load


@pytest.fixture(scope="session")
def check_axis():
    """
    Составная сетка Гаусса по t = ln x на [−12, 12]: квадратура для скалярных произведений.
    """
    return Axis.log_gauss(-12.0, 12.0)


@pytest.fixture(scope="session")
def narrow_axis():
    return Axis.log_gauss(-6.0, 6.0)

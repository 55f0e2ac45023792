from heegner_heights.gzheight import SpectralEvalConfig
from heegner_heights.heegner import make_level
from heegner_heights.quadfield import make_discriminant
from heegner_heights.utils import ResultCache
import pytest

# fundamental D = 1 (mod 4) with |D| <= 200
SMALL_DISCRIMINANTS = [
    D
    for D in range(-3, -201, -4)
    if all((-D) % (p * p) for p in range(2, 15))
]


@pytest.fixture(scope="session")
def disc3():
    return make_discriminant(-3)


@pytest.fixture(scope="session")
def level7(disc3):
    return make_level(disc3, 7)


@pytest.fixture(scope="session")
def fast_config():
    return SpectralEvalConfig(truncation=2000, threads=1)


@pytest.fixture
def cache_path(tmp_path):
    return tmp_path / "cache" / "heights.jsonl"


@pytest.fixture
def cache(cache_path):
    return ResultCache(cache_path)

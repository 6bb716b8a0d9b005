import pytest

from _util import CORPUS_DIR


@pytest.fixture(scope="session")
def corpus_dir():
    return CORPUS_DIR


def pytest_configure(config):
    try:
        from hypothesis import HealthCheck, settings
    except ImportError:
        return
    settings.register_profile(
        "dyadnet",
        deadline=None,
        suppress_health_check=[HealthCheck.too_slow],
        derandomize=True,
    )
    settings.load_profile("dyadnet")

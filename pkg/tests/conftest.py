import numpy as np
import pytest

from unirecover.config import get_settings


@pytest.fixture(autouse=True)
def fresh_settings():
    """Settings are cached process-wide; tests that monkeypatch env vars need a clean read"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

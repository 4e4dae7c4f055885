import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from starsfd import SystemConfig, build_correlations, desk_config  # noqa: E402


def small_config(**overrides):
    """Tiny instance used for gradient and identity checks."""
    base = dict(M_T=8, M_R=8, N_h=2, N_v=4, K_r=2, K_t=2)
    return SystemConfig(**{**base, **overrides})


@pytest.fixture
def small():
    cfg = small_config()
    return cfg, build_correlations(cfg)


@pytest.fixture(scope="session")
def desk():
    cfg = desk_config()
    return cfg, build_correlations(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

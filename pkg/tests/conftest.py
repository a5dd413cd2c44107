import numpy as np
import pytest
from hypothesis import settings

from src.utils.sphere_integration import BudgetPolicy, SphereSampler

settings.register_profile("deterministic", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("deterministic")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_budget() -> BudgetPolicy:
    return BudgetPolicy(initial=2**13, cap=2**15, rel_error=0.05)


@pytest.fixture
def sampler() -> SphereSampler:
    return SphereSampler(2, seed=7)


def e1(n: int = 2, r: float = 1.0) -> np.ndarray:
    coords = np.zeros(n, dtype=np.complex128)
    coords[0] = r
    return coords

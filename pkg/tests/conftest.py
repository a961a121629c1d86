import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repro",
    deadline=None,
    derandomize=True,
    max_examples=150,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repro")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def bits(x: np.ndarray) -> bytes:
    """Bit pattern of a float64 array, for exact comparisons."""
    return np.ascontiguousarray(x, dtype=np.float64).tobytes()


@pytest.fixture
def small_grid():
    """A compact but representative topology grid."""
    from reprokrylov.repro_reduce import Topology

    def make(n):
        return [
            Topology(p, t, c)
            for p in (1, 2, 8)
            for t in (1, 3)
            for c in (1, 13, n)
        ]

    return make

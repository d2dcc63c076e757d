import numpy as np
import pytest

from spmask import kernels
from spmask._accel import HAVE_NUMBA
from spmask.scenes import synthetic_room

BACKENDS = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route the public kernels through one backend for the duration of a test."""
    for name in ("fps", "ball_query", "fh_segment"):
        monkeypatch.setattr(kernels, name, kernels.get(name, request.param))
    return request.param


@pytest.fixture(scope="session")
def room():
    return synthetic_room(n_points=3000, seed=7)



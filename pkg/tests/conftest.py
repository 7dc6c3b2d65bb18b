import numpy as np
import pytest

from blochframes.kgrid import KGrid
from blochframes.models import build_projector_field, builtin


@pytest.fixture(scope="session")
def projector_cache():
    cache = {}

    def get(name, n, **params):
        key = (name, n, tuple(sorted(params.items())))
        if key not in cache:
            model = builtin(name, params)
            cache[key] = build_projector_field(model, KGrid(model.dim, n))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

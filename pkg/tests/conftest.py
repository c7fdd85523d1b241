import numpy as np
import pytest

from elflab.fixtures import FIXTURES
from elflab.graph_core import random_weighted_graph


@pytest.fixture(params=sorted(FIXTURES))
def fixture_graph(request):
    return FIXTURES[request.param]()


def random_graphs(count, n_max=30, seed0=1000, n_min=3):
    rng = np.random.default_rng(seed0)
    out = []
    for i in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        out.append(random_weighted_graph(n, seed0 + i))
    return out

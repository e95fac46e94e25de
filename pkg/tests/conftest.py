import itertools

import pytest

from bowsp import gen
from bowsp.core import DEFAULT_M

# scaled-down generator settings: (d, e, M); M = 30 puts authorization and
# SoD violations on the same scale as the soft penalties
SETTINGS = list(itertools.product((0.3, 0.6, None), (0.3, 0.5, 0.8), (30, DEFAULT_M)))
SIZES = [(2, 5), (3, 7), (4, 9), (5, 12), (3, 12), (4, 6), (5, 8), (2, 10)]


def small_instance(i: int):
    """The ``i``-th instance of the exhaustive-check corpus (k <= 5, n <= 12)."""
    k, n = SIZES[i % len(SIZES)]
    d, e, M = SETTINGS[(i // len(SIZES)) % len(SETTINGS)]
    return gen.generate(gen.small_params(k, seed=1000 + i, n=n, d=d, e=e, M=M))


def corpus(count: int, start: int = 0):
    return [small_instance(i) for i in range(start, start + count)]


@pytest.fixture(scope="session")
def fixture_schema():
    return gen.load_fixture()

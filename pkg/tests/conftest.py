import numpy as np
import pytest

from fpgw.model import MmSpace


def line_space(rng, n, total=1.0, power=2, masses=None):
    """Random points on [0, 1]: |x - x'|^power structure, coordinates as features."""
    coords = rng.uniform(0.0, 1.0, size=n)
    structure = np.abs(coords[:, None] - coords[None, :]) ** power
    mass = np.full(n, total / n) if masses is None else np.asarray(masses, dtype=float)
    return MmSpace(structure, mass, features=coords[:, None])


def line_cost(source, target):
    return np.abs(source.features[:, 0][:, None] - target.features[:, 0][None, :])


def random_instance(rng, n, m, source_total=1.0, target_total=1.0):
    source = line_space(rng, n, source_total)
    target = line_space(rng, m, target_total)
    return source, target, line_cost(source, target)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def instance(rng):
    return random_instance(rng, 4, 5, 1.0, 0.8)

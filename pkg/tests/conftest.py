import numpy as np
import pytest

from edident import CenteredGamma, EDModelSpec, Gaussian, Mixture, ShockBlock

MIX = Mixture(0.25, 1.5, 0.5, 0.5)
GAMMA = CenteredGamma(2.0, 0.5)

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def mixture_independent_q1():
    """q = 1, T = 4, independent pairs with mixture xi."""
    return EDModelSpec.uniform(4, [0.5], MIX, ShockBlock.independent_pair(Gaussian(1.0), MIX))


@pytest.fixture
def dependent_q1():
    """q = 1, T = 4, pairs built from a mixture and a gamma factor; corr(eta, xi) != 0."""
    pair = ShockBlock.factor_pair(MIX, GAMMA, [[1.0, 0.3], [0.6, 1.0]])
    return EDModelSpec.uniform(4, [0.5], MIX, pair)


@pytest.fixture
def gaussian_q1():
    return EDModelSpec.uniform(5, [0.5], Gaussian(1.0), ShockBlock.gaussian_pair(1.0, 1.0, 0.3))


def random_spec(rng, T=None, q=None):
    """Random valid spec mixing all families and pair kinds."""
    T = T or int(rng.integers(2, 7))
    q = int(rng.integers(0, T)) if q is None else q
    a = tuple(rng.uniform(-1.5, 1.5, q))

    def factor():
        k = rng.integers(3)
        if k == 0:
            return Gaussian(float(rng.uniform(0.2, 2)))
        if k == 1:
            return Mixture(float(rng.uniform(0.1, 0.9)), float(rng.uniform(-2, 2)), float(rng.uniform(0.2, 1)), float(rng.uniform(0.2, 1)))
        return CenteredGamma(float(rng.uniform(0.5, 4)), float(rng.choice([-1, 1]) * rng.uniform(0.2, 1)))

    def pair():
        k = rng.integers(3)
        if k == 0:
            v1, v2 = rng.uniform(0.2, 2, 2)
            return ShockBlock.gaussian_pair(v1, v2, float(rng.uniform(-0.9, 0.9) * np.sqrt(v1 * v2)))
        if k == 1:
            return ShockBlock.independent_pair(factor(), factor())
        return ShockBlock.factor_pair(factor(), factor(), rng.uniform(-1, 1, (2, 2)))

    blocks = tuple(ShockBlock.singleton(factor()) for _ in range(q)) + tuple(pair() for _ in range(T))
    return EDModelSpec(T, q, a, blocks)

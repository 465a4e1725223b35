import numpy as np
import pytest

from chemorelax.model import ModelParams, PressureLaw


@pytest.fixture(scope="session")
def default_params():
    """gamma=2 law with c0 = 2, c1 = 0.5, margin = 1; the workhorse setup."""
    return ModelParams(eps=0.1, mu=1.0, a=1.0, b=1.0, rho_bar=1.0,
                       pressure=PressureLaw(kappa=1.0, gamma=2.0))


@pytest.fixture(scope="session")
def cubic_params(default_params):
    """gamma=3 law, so H(n) is genuinely nonzero."""
    from dataclasses import replace
    return replace(default_params, pressure=PressureLaw(kappa=1.0, gamma=3.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)

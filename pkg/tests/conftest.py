"""Shared fixtures: the bundled families built once per session at their
shipping resolutions (the laplace grid alone is ~262k nodes)."""
import pytest

from stamlab import build_density, isotropic_spec


@pytest.fixture(scope="session")
def gaussian():
    return build_density(isotropic_spec("gaussian"))


@pytest.fixture(scope="session")
def uniform():
    return build_density(isotropic_spec("uniform"))


@pytest.fixture(scope="session")
def logistic():
    return build_density(isotropic_spec("logistic"))


@pytest.fixture(scope="session")
def gumbel():
    return build_density(isotropic_spec("gumbel"))


@pytest.fixture(scope="session")
def smoothed_laplace():
    return build_density(isotropic_spec("smoothed_laplace"))


@pytest.fixture(scope="session")
def gamma4():
    return build_density(isotropic_spec("gamma", shape=4.0))


@pytest.fixture(scope="session")
def laplace():
    return build_density(isotropic_spec("laplace"))

import numpy as np
import pytest

from obs_thermo.lie import close_algebra, gram_schmidt, observability_space
from obs_thermo.models import CentralSpinSpec, all_up_state, build_central_spin


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False,
                     help="run long checks (N=4 closure)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running check, enabled with --slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_ket(rng, n):
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


def random_density(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def central_spin():
    return build_central_spin(CentralSpinSpec(3, field=10.0, couplings=(-3.0, -3.0, -3.0)))


@pytest.fixture(scope="session")
def lie3(central_spin):
    return close_algebra([central_spin.drift, *central_spin.controls])


@pytest.fixture(scope="session")
def v41(central_spin, lie3):
    """Observability span truncated after one bracket round, orthonormalised."""
    v, rep = observability_space(lie3[0], central_spin.observable, max_depth=1)
    return gram_schmidt(v), rep


@pytest.fixture(scope="session")
def vfull(central_spin, lie3):
    v, rep = observability_space(lie3[0], central_spin.observable)
    return gram_schmidt(v), rep


@pytest.fixture(scope="session")
def rho_up():
    return all_up_state(4)

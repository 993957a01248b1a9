import numpy as np
import pytest

from qndsim.config import default_config, ideal_config
from qndsim.fock import FockSpace, JointState, ModeState


@pytest.fixture(scope="session")
def base_config():
    return default_config()


@pytest.fixture(scope="session")
def perfect_config():
    return ideal_config()


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Ginibre-random full-rank density matrix."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_mode_state(rng: np.random.Generator, n_max: int) -> ModeState:
    return ModeState(FockSpace(n_max), random_density_matrix(rng, n_max + 1))


def random_qubit_mode_state(rng: np.random.Generator, n_max: int) -> JointState:
    dim = 2 * (n_max + 1)
    return JointState(
        ("q", "m"), ("q", "m"), (None, FockSpace(n_max)), random_density_matrix(rng, dim)
    )

import numpy as np
import pytest

from cqedsim.model import TCParams


@pytest.fixture(scope="session")
def paper_params() -> TCParams:
    """Three identical resonant emitters, g = 4 rad/ns, kappa = 2 rad/ns."""
    return TCParams.uniform(3, 4.0, 2.0)


@pytest.fixture(scope="session")
def paper_times() -> np.ndarray:
    return np.linspace(0.0, 3.0, 51)


def random_params(rng: np.random.Generator, max_emitters: int = 4) -> TCParams:
    n = int(rng.integers(1, max_emitters + 1))
    return TCParams(
        n_emitters=n,
        couplings=tuple(rng.uniform(0.3, 5.0, n)),
        kappa=float(rng.uniform(0.0, 3.0)),
        cavity_freq=0.0,
        emitter_freqs=tuple(rng.uniform(-1.5, 1.5, n)),
        excited_emitter=int(rng.integers(1, n + 1)),
    )

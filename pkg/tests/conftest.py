import numpy as np
import pytest

from regimeclt import EmissionSpec, Gaussian, ModelSpec, TransitionMatrix, Uniform

BENCH_ROWS = np.array([[0.9, 0.1], [0.2, 0.8]])


@pytest.fixture(scope="session")
def bench_chain() -> TransitionMatrix:
    return TransitionMatrix(BENCH_ROWS)


@pytest.fixture(scope="session")
def bench_model(bench_chain) -> ModelSpec:
    emissions = EmissionSpec((Gaussian(-1.0, 1.0), Gaussian(1.0, 1.0)))
    return ModelSpec(bench_chain, emissions)


@pytest.fixture(scope="session")
def iid_model() -> ModelSpec:
    return ModelSpec(TransitionMatrix(np.array([[1.0]])), EmissionSpec((Gaussian(0.0, 1.0),)))


@pytest.fixture(scope="session")
def uniform_model(bench_chain) -> ModelSpec:
    emissions = EmissionSpec((Uniform(-1.0, 0.5), Uniform(-0.5, 1.0)))
    return ModelSpec(bench_chain, emissions)


def random_ergodic_rows(rng: np.random.Generator, n_states: int) -> np.ndarray:
    """Dirichlet rows plus a floor on the diagonal, always ergodic."""
    rows = rng.dirichlet(np.ones(n_states), size=n_states)
    rows = 0.9 * rows + 0.1 * np.eye(n_states)
    return rows / rows.sum(axis=1, keepdims=True)

"""Deterministic random-model pools shared by several test modules."""

import numpy as np


def random_chain_pool(count: int, seed: int, n_min: int = 2, n_max: int = 8) -> list:
    """Ergodic transition matrices of mixed size, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    rows_list = []
    for _ in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        rows = rng.dirichlet(np.full(n, rng.uniform(0.3, 3.0)), size=n)
        rows = 0.92 * rows + 0.08 * np.eye(n)
        rows_list.append(rows / rows.sum(axis=1, keepdims=True))
    return rows_list

import numpy as np
import pytest

import bart


@pytest.fixture(scope="session")
def friedman_100():
    """One fixed simulated benchmark dataset: n=100, p=10, sigma=1."""
    data, f = bart.generate_friedman(np.random.default_rng(101), 100, 10, 1.0)
    return data, f


@pytest.fixture(scope="session")
def tiny_data():
    """Ten rows on one variable with three distinct values (two cutpoints)."""
    x = np.array([[0.0]] * 4 + [[1.0]] * 3 + [[2.0]] * 3)
    rng = np.random.default_rng(42)
    y = np.concatenate([rng.normal(-2, 1, 4), rng.normal(0.5, 1, 3), rng.normal(3, 1, 3)])
    return bart.make_dataset(x, y)


def make_grid_data(seed=5, n=12, levels=3, p=2, noise=0.7):
    """Small integer-valued dataset: every split partition is exactly enumerable."""
    rng = np.random.default_rng(seed)
    x = np.column_stack([rng.integers(0, levels, n).astype(float) for _ in range(p)])
    y = np.sin(x[:, 0]) + 0.5 * x[:, 1 % p] + rng.normal(0, noise, n)
    return bart.make_dataset(x, y)

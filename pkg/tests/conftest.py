import numpy as np
import pytest

from eaml.data import Dataset, FeatureSpec


def numeric_dataset(X, y):
    X = np.asarray(X, dtype=float)
    specs = [FeatureSpec(name=f"x{j + 1}", kind="numeric") for j in range(X.shape[1])]
    return Dataset(specs, X, np.asarray(y))


def random_dataset(n, p, seed, beta=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = rng.normal(0.0, 1.0, size=p)
    z = X @ beta - 0.3
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(int)
    if y.min() == y.max():  # force both classes for tiny draws
        y[0] = 1 - y[0]
    return numeric_dataset(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

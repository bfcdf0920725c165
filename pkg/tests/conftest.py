import numpy as np
import pytest

from simcal import Dataset, Family


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_linear(n=60, p=8, seed=0, signal=(1.5,), noise=1.0):
    """Random Gaussian-design linear dataset with signal on the first
    len(signal) columns."""
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, p))
    y = X[:, : len(signal)] @ np.asarray(signal) + noise * gen.normal(size=n)
    return Dataset(X=X, y=y, family=Family.LINEAR)


def make_binary(n=80, p=8, seed=0, signal=(1.2,), intercept=0.0):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, p))
    eta = intercept + X[:, : len(signal)] @ np.asarray(signal)
    y = (gen.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return Dataset(X=X, y=y, family=Family.BINARY)


def make_poisson(n=80, p=8, seed=0, signal=(0.8,), intercept=0.5):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, p))
    eta = intercept + X[:, : len(signal)] @ np.asarray(signal)
    y = gen.poisson(np.exp(eta)).astype(float)
    return Dataset(X=X, y=y, family=Family.POISSON)


def standardized(X):
    """Independent re-implementation of the column standardization used
    for oracle calculations: center, scale by sd with divisor n."""
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    sd = np.sqrt(((X - mu) ** 2).mean(axis=0))
    sd[sd == 0] = 1.0
    return (X - mu) / sd

import numpy as np
import pytest

from wflow import Signal, generate_design


def fd_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def fd_jacobian(vec_fn, x, h=1e-5):
    """Central-difference Jacobian of a vector function (used on gradients)."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((vec_fn(xp) - vec_fn(xm)) / (2 * h))
    return np.stack(cols, axis=1)


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    denom = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(a - b) / denom


@pytest.fixture(scope="session")
def small_problem():
    """A tiny Gaussian problem reused by cheap exactness tests."""
    sig = Signal.standard(8)
    design = generate_design(8, 60, "gaussian", sig, seed=11)
    return design, sig

"""Shared test helpers.

numeric_grad is the test suite's own central-difference oracle.  It is kept
independent of taalgen.tensor.grad_check on purpose: the library's checker
is itself under test.
"""

import numpy as np
import pytest


def numeric_grad(f, array, h=1e-6):
    """Central-difference gradient of scalar f() w.r.t. the given ndarray.

    f is re-evaluated with elements of `array` perturbed in place.
    """
    g = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f())
        flat[i] = orig - h
        fm = float(f())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a, b, floor=1.0):
    """Worst-case elementwise relative error with an absolute floor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

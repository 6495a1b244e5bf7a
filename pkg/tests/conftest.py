import numpy as np
import pytest


@pytest.fixture(scope="session")
def tiny_split():
    """Small synthesized train/test split shared by training-level tests."""
    from rfadvdef import rfsynth

    return rfsynth.build_dataset(
        list(rfsynth.ModScheme), (14.0, 20.0), n_per_class=40, n_test_per_class=20, seed=11
    )


def central_difference(f, arr, h=1e-6):
    """Central finite differences of scalar f() with respect to every entry
    of arr (mutated in place and restored)."""
    out = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        orig = arr[i]
        arr[i] = orig + h
        lp = f()
        arr[i] = orig - h
        lm = f()
        arr[i] = orig
        out[i] = (lp - lm) / (2 * h)
        it.iternext()
    return out


def rel_err(a, b, floor=1e-8):
    denom = max(float(np.abs(a).max()), float(np.abs(b).max()), floor)
    return float(np.abs(a - b).max()) / denom

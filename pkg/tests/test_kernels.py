import numpy as np
import pytest

from peeldyn import kernels


def test_numpy_kernel_integrates_constants_exactly():
    delta = 0.01
    i0 = -11
    F = np.ones((30, 40))
    P, R, S = kernels.numpy_prefix_sums(F, i0, delta)
    xi = (np.arange(30) + i0) * delta
    eta = np.arange(40) * delta
    # P(xi, eta) = eta - |xi| where eta >= |xi|
    ok = eta[None, :] >= np.abs(xi)[:, None] - 1e-12
    np.testing.assert_allclose(P[ok], (eta[None, :] - np.abs(xi)[:, None])[ok], atol=1e-12)


@pytest.mark.skipif(kernels.compiled_prefix_sums is None, reason="compiled kernel not built")
def test_compiled_kernel_matches_numpy():
    rng = np.random.default_rng(7)
    F = rng.standard_normal((120, 150))
    a = kernels.numpy_prefix_sums(F, -40, 1e-2)
    b = kernels.compiled_prefix_sums(F, -40, 1e-2)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)


def test_backend_reported():
    print("kernel backend:", kernels.BACKEND)
    assert kernels.BACKEND in ("cython", "numpy")

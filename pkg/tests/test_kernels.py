import importlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmvgame import _kernels
from mmvgame._kernels import _fallback

try:
    _core = importlib.import_module("mmvgame._kernels._core")
except ImportError:  # extension not built
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernels not built")


def _bands(n, seed):
    rng = np.random.default_rng(seed)
    z = np.linspace(-2, 2, n)
    drift = -z + 0.1 * rng.standard_normal(n)
    q = 0.125 / (z[1] - z[0]) ** 2
    dz = z[1] - z[0]
    lo = q - drift / (2 * dz)
    up = q + drift / (2 * dz)
    di = -2 * q - 0.1 * rng.random(n)
    return lo, di, up, 0.05 * rng.random(n), 1.0 + 0.1 * np.sin(z)


def test_backend_selection_reports_a_known_name():
    assert _kernels.BACKEND in ("cython", "python")
    assert set(_kernels.backends()) >= {"python"}


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 60), seed=st.integers(0, 10 ** 6))
def test_tridiag_matches_dense_solve(n, seed):
    rng = np.random.default_rng(seed)
    # full-length bands: lower[i] multiplies x[i-1], upper[i] multiplies x[i+1]
    lower = rng.random(n)
    upper = rng.random(n)
    diag = 3.0 + rng.random(n)  # diagonally dominant
    rhs = rng.standard_normal(n)
    A = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    x = _fallback.tridiag_solve(lower, diag, upper, rhs)
    np.testing.assert_allclose(A @ x, rhs, atol=1e-12)
    if _core is not None:
        np.testing.assert_allclose(_core.tridiag_solve(lower, diag, upper, rhs), x, atol=1e-13)


def test_cn_step_closes_boundaries_by_linear_extrapolation():
    lo, di, up, src, u = _bands(30, 1)
    v = _fallback.cn_step(lo, di, up, src, u, 0.01)
    assert v[0] == pytest.approx(2 * v[1] - v[2], abs=1e-14)
    assert v[-1] == pytest.approx(2 * v[-2] - v[-3], abs=1e-14)


def test_cn_march_equals_repeated_steps():
    lo, di, up, src, u = _bands(25, 2)
    M = _fallback.cn_march(lo, di, up, src, u, 0.02, 6)
    v = u.copy()
    for k in range(4, -1, -1):
        v = _fallback.cn_step(lo, di, up, src, v, 0.02)
        np.testing.assert_allclose(M[:, k], v, atol=1e-13)
    np.testing.assert_array_equal(M[:, -1], u)


@needs_core
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backend_parity_march_and_step(seed):
    lo, di, up, src, u = _bands(101, seed)
    np.testing.assert_allclose(_core.cn_march(lo, di, up, src, u, 0.01, 50),
                               _fallback.cn_march(lo, di, up, src, u, 0.01, 50), rtol=0, atol=1e-12)
    np.testing.assert_allclose(_core.cn_step(lo, di, up, src, u, 0.01),
                               _fallback.cn_step(lo, di, up, src, u, 0.01), rtol=0, atol=1e-13)


@needs_core
def test_backend_parity_bilinear():
    rng = np.random.default_rng(5)
    fields = np.ascontiguousarray(rng.standard_normal((3, 11, 7)))
    zq = rng.uniform(-1, 1, 200)
    tq = rng.uniform(0, 1, 200)
    a = _core.bilinear(fields, -1.0, 0.2, 0.0, 1 / 6, zq, tq)
    b = _fallback.bilinear(fields, -1.0, 0.2, 0.0, 1 / 6, zq, tq)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


def test_bilinear_reproduces_nodes_and_midpoints():
    z = np.linspace(0, 1, 5)
    t = np.linspace(0, 2, 3)
    f = np.stack([np.add.outer(3 * z, t), np.multiply.outer(z, t)])
    vals = _kernels.bilinear(np.ascontiguousarray(f), 0.0, 0.25, 0.0, 1.0, z[[1, 3]], t[[2, 1]])
    np.testing.assert_allclose(vals[:, 0], f[:, 1, 2], atol=1e-15)
    np.testing.assert_allclose(vals[:, 1], f[:, 3, 1], atol=1e-15)
    mid = _kernels.bilinear(np.ascontiguousarray(f[:1]), 0.0, 0.25, 0.0, 1.0, np.array([0.125]), np.array([0.0]))
    assert mid[0, 0] == pytest.approx(0.5 * (f[0, 0, 0] + f[0, 1, 0]), abs=1e-15)

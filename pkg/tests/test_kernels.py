import itertools

import numpy as np
import pytest

from mrvflab import kernels
from oracles import grid_isotonic_nnls


def test_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")


def test_pava_matches_grid_oracle(kern, rng):
    for n in (1, 2, 5, 17):
        y = rng.normal(size=n)
        w = rng.uniform(0.1, 3.0, n)
        x, loss = kern.pava(y, w)
        xo, lo = grid_isotonic_nnls(y, w, (n,))
        np.testing.assert_allclose(x, xo, atol=1e-9)
        assert loss == pytest.approx(lo, abs=1e-9)


def test_pava_sorted_input_is_fixed(kern):
    y = np.array([-1.0, 0.0, 2.5, 7.0])
    x, loss = kern.pava(y, np.ones(4))
    np.testing.assert_array_equal(x, y)
    assert loss == 0.0


def test_pava_pools_violators(kern):
    x, loss = kern.pava(np.array([3.0, 1.0]), np.array([1.0, 3.0]))
    np.testing.assert_allclose(x, [1.5, 1.5])
    assert loss == pytest.approx(2.25 + 3 * 0.25)


@pytest.mark.parametrize("shape", [(2, 2), (3, 3), (2, 4), (4, 5), (2, 2, 3)])
def test_grid_isotonic_matches_nnls(kern, rng, shape):
    for _ in range(10):
        y = rng.normal(size=int(np.prod(shape))) * 5
        w = rng.uniform(0.05, 2.0, y.size)
        x, loss, _ = kern.grid_isotonic(y, w, shape)
        xo, lo = grid_isotonic_nnls(y, w, shape)
        np.testing.assert_allclose(x, xo, atol=1e-8)
        assert loss == pytest.approx(lo, abs=1e-8)


def test_grid_isotonic_with_ties_and_skewed_weights(kern):
    y = np.array([5.0, 5.0, 5.0, 5.0, 0.0, 5.0, 5.0, 5.0, 5.0])
    w = np.array([1e-4, 1, 1, 1, 1e4, 1, 1, 1, 1e-4])
    x, loss, _ = kern.grid_isotonic(y, w, (3, 3))
    xo, lo = grid_isotonic_nnls(y, w, (3, 3))
    np.testing.assert_allclose(x, xo, atol=1e-7)


def test_grid_edges_count(kern):
    assert len(kern.grid_edges((3, 4))) == 2 * 4 + 3 * 3
    assert len(kern.grid_edges((5,))) == 4


def test_axis_order_bounds_are_lower_bounds(kern, rng):
    shape = (3, 3)
    y = rng.normal(size=9)
    w = rng.uniform(0.5, 1.5, 9)
    perms = np.array(list(itertools.permutations(range(3))), dtype=np.int64)
    b0 = kern.axis_order_bounds(y, w, shape, 0, perms)
    b1 = kern.axis_order_bounds(y, w, shape, 1, perms)
    yt, wt = y.reshape(shape), w.reshape(shape)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            ix = np.ix_(p, q)
            _, loss = grid_isotonic_nnls(yt[ix], wt[ix], shape)
            assert max(b0[i], b1[j]) <= loss + 1e-9


def test_backends_agree(rng):
    from mrvflab import _kernels_py
    try:
        from mrvflab import _kernels
    except ImportError:
        pytest.skip("extension not built")
    y = rng.normal(size=20)
    w = rng.uniform(0.1, 2, 20)
    a = _kernels.grid_isotonic(y, w, (4, 5))
    b = _kernels_py.grid_isotonic(y, w, (4, 5))
    np.testing.assert_allclose(a[0], b[0], atol=1e-10)

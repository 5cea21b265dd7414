"""Independent reference solvers used only by the tests."""
import itertools

import numpy as np
from scipy.optimize import nnls


def chain_edges(shape):
    """(lo, hi) pairs of adjacent grid cells along every axis, C order."""
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    out = []
    for a in range(len(shape)):
        for lo in np.ndindex(*shape):
            if lo[a] + 1 < shape[a]:
                hi = list(lo)
                hi[a] += 1
                out.append((idx[lo], idx[tuple(hi)]))
    return out


def grid_isotonic_nnls(y, w, shape):
    """Weighted projection onto nondecreasing grid tensors via the dual NNLS."""
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    edges = chain_edges(shape)
    if not edges:
        return y.copy(), 0.0
    A = np.zeros((len(edges), y.size))
    for r, (lo, hi) in enumerate(edges):
        A[r, lo], A[r, hi] = 1.0, -1.0
    B = (A / np.sqrt(w)).T
    lam, _ = nnls(B, np.sqrt(w) * y, maxiter=50 * len(edges))
    x = y - (A.T @ lam) / w
    return x, float(np.sum(w * (x - y) ** 2))


def brute_monotone_loss(target, w):
    """Best monotone fit over every combination of per-agent strict orders."""
    target = np.asarray(target, dtype=float)
    w = np.asarray(w, dtype=float)
    best, best_x = np.inf, None
    for orders in itertools.product(*(itertools.permutations(range(n)) for n in target.shape)):
        ix = np.ix_(*orders)
        x, loss = grid_isotonic_nnls(target[ix], w[ix], target.shape)
        if loss < best - 1e-12:
            best = loss
            out = np.empty_like(target)
            out[ix] = x.reshape(target.shape)
            best_x = out
    return best, best_x


def is_monotone(x, tol=1e-7):
    """Every pair of slices along every axis is pointwise ordered."""
    for i in range(x.ndim):
        s = np.moveaxis(x, i, 0).reshape(x.shape[i], -1)
        for a, b in itertools.combinations(range(len(s)), 2):
            if not (np.all(s[a] >= s[b] - tol) or np.all(s[b] >= s[a] - tol)):
                return False
    return True

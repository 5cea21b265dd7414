"""Pure numpy versions of the compiled kernels (same signatures and results)."""
import numpy as np


def pava(y, w):
    """Weighted nondecreasing isotonic fit of a 1-D sequence.

    Returns (fitted values, weighted squared error).
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    means, weights, lengths = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        lengths.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            wt = weights[-2] + weights[-1]
            means[-2] = (weights[-2] * means[-2] + weights[-1] * means[-1]) / wt
            weights[-2] = wt
            lengths[-2] += lengths[-1]
            del means[-1], weights[-1], lengths[-1]
    out = np.repeat(means, lengths)
    return out, max(float(np.sum(w * (out - y) ** 2)), 0.0)


def axis_order_bounds(y, w, shape, axis, perms):
    """Isotonic loss along one axis for every candidate order of that axis."""
    shape = tuple(int(s) for s in shape)
    yt = np.moveaxis(np.asarray(y, dtype=float).reshape(shape), axis, -1).reshape(-1, shape[axis])
    wt = np.moveaxis(np.asarray(w, dtype=float).reshape(shape), axis, -1).reshape(-1, shape[axis])
    out = np.zeros(len(perms))
    for p, perm in enumerate(np.asarray(perms)):
        out[p] = sum(pava(yf[perm], wf[perm])[1] for yf, wf in zip(yt, wt))
    return out


def grid_edges(shape):
    """Edges (lo, hi) of the product-of-chains order on a C-ordered grid."""
    shape = tuple(int(s) for s in shape)
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    edges = []
    for a in range(len(shape)):
        lo = np.take(idx, np.arange(shape[a] - 1), axis=a).ravel()
        hi = np.take(idx, np.arange(1, shape[a]), axis=a).ravel()
        edges.append(np.stack([lo, hi], axis=1))
    if not edges:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(edges).astype(np.int64)


def _gram(E, w):
    inv = 1.0 / w
    m = len(E)
    G = np.zeros((m, m))
    for col in (0, 1):
        for col2 in (0, 1):
            same = E[:, col][:, None] == E[:, col2][None, :]
            sign = 1.0 if col == col2 else -1.0
            G += sign * same * inv[E[:, col]][:, None]
    return G


def _solve_grid(y, w, E, tol):
    m = len(E)
    c = y[E[:, 0]] - y[E[:, 1]]
    G = _gram(E, w)
    lam = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    excluded = np.zeros(m, dtype=bool)
    grad = c.copy()
    it = 0
    while it < 3 * m + 10:
        it += 1
        cand = np.where(passive | excluded, -np.inf, grad)
        j = int(np.argmax(cand))
        if cand[j] <= tol:
            break
        passive[j] = True
        inner = 0
        while True:
            inner += 1
            P = np.flatnonzero(passive)
            Gp = G[np.ix_(P, P)]
            try:
                Lc = np.linalg.cholesky(Gp)
                if np.min(np.diag(Lc) ** 2) <= 1e-12 * np.min(np.diag(Gp)):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                passive[j] = False
                excluded[j] = True
                break
            z = np.linalg.solve(Gp, c[P])
            neg = z <= 0.0
            if not neg.any():
                lam[P] = z
                break
            alpha = np.min(lam[P][neg] / (lam[P][neg] - z[neg]))
            lam[P] += alpha * (z - lam[P])
            drop = P[lam[P] <= 1e-15]
            lam[drop] = 0.0
            passive[drop] = False
            if not passive.any() or inner > m + 5:
                break
        grad = c - G @ lam
    x = y.copy()
    np.subtract.at(x, E[:, 0], lam / w[E[:, 0]])
    np.add.at(x, E[:, 1], lam / w[E[:, 1]])
    return x, float(np.sum(w * (x - y) ** 2)), it


def grid_isotonic(y, w, shape, tol=1e-10):
    """Weighted isotonic fit of a flat C-ordered tensor, monotone on every axis.

    Returns (fitted flat array, weighted squared error, active-set iterations).
    """
    y = np.ascontiguousarray(y, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    E = grid_edges(shape)
    if len(E) == 0:
        return y.copy(), 0.0, 0
    return _solve_grid(y, w, E, tol * (1.0 + np.max(np.abs(y))))


def search_orders(y, w, shape, perm_tables, combos, bounds, rtol, atol, tol=1e-10):
    """Solve the grid problem for order combinations in ascending bound order.

    Same contract as the compiled version.
    """
    y = np.ascontiguousarray(y, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    shape = tuple(int(s) for s in shape)
    E = grid_edges(shape)
    grid = np.arange(y.size).reshape(shape)
    scale = tol * (1.0 + np.max(np.abs(y)))
    best = np.inf
    found = []
    solves = 0
    for r, combo in enumerate(np.asarray(combos)):
        if bounds[r] > best + rtol * abs(best) + atol:
            break
        idx = grid[np.ix_(*[np.asarray(t)[k] for t, k in zip(perm_tables, combo)])].ravel()
        if len(E):
            xs, loss, _ = _solve_grid(y[idx], w[idx], E, scale)
        else:
            xs, loss = y[idx].copy(), 0.0
        solves += 1
        if loss <= best + rtol * abs(best) + atol:
            xo = np.empty(y.size)
            xo[idx] = xs
            found.append((r, xo, loss))
            best = min(best, loss)
    keep = [f for f in found if f[2] <= best + rtol * abs(best) + atol]
    return best, keep, solves

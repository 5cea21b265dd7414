# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for monotone fitting on product-of-chains grids.

The grid problem is a weighted isotonic regression where every axis of a
tensor must be nondecreasing in index order.  It is solved through its dual,
a nonnegative least-squares problem over the edge multipliers, with a
Lawson-Hanson active set working on the Gram matrix.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()


def pava(const double[::1] y, const double[::1] w):
    """Weighted nondecreasing isotonic fit of a 1-D sequence.

    Returns (fitted values, weighted squared error).
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef double loss = _pava_loss(&y[0], &w[0], n, 1)
    out = np.empty(n)
    cdef double[::1] o = out
    _pava_fill(&y[0], &w[0], n, &o[0])
    return out, loss


cdef double _pava_loss(const double* y, const double* w, Py_ssize_t n, Py_ssize_t stride) noexcept nogil:
    # blocks kept on small stacks; n is an action count so it stays tiny
    cdef double bm[64]
    cdef double bw[64]
    cdef double bs[64]
    cdef Py_ssize_t top = 0, i
    cdef double m, ww, loss = 0.0, yy
    for i in range(n):
        bm[top] = y[i * stride]
        bw[top] = w[i * stride]
        bs[top] = w[i * stride] * y[i * stride] * y[i * stride]
        top += 1
        while top > 1 and bm[top - 2] > bm[top - 1]:
            ww = bw[top - 2] + bw[top - 1]
            m = (bw[top - 2] * bm[top - 2] + bw[top - 1] * bm[top - 1]) / ww
            bs[top - 2] = bs[top - 2] + bs[top - 1]
            bm[top - 2] = m
            bw[top - 2] = ww
            top -= 1
    for i in range(top):
        # sum w (y - m)^2 = sum w y^2 - W m^2
        loss += bs[i] - bw[i] * bm[i] * bm[i]
    if loss < 0.0:
        loss = 0.0
    return loss


cdef void _pava_fill(const double* y, const double* w, Py_ssize_t n, double* out) noexcept nogil:
    cdef double bm[64]
    cdef double bw[64]
    cdef Py_ssize_t bl[64]
    cdef Py_ssize_t top = 0, i, j, k = 0
    for i in range(n):
        bm[top] = y[i]
        bw[top] = w[i]
        bl[top] = 1
        top += 1
        while top > 1 and bm[top - 2] > bm[top - 1]:
            bm[top - 2] = (bw[top - 2] * bm[top - 2] + bw[top - 1] * bm[top - 1]) / (bw[top - 2] + bw[top - 1])
            bw[top - 2] += bw[top - 1]
            bl[top - 2] += bl[top - 1]
            top -= 1
    for i in range(top):
        for j in range(bl[i]):
            out[k] = bm[i]
            k += 1


def axis_order_bounds(const double[::1] y, const double[::1] w, shape, Py_ssize_t axis,
                      const cnp.int64_t[:, ::1] perms):
    """Isotonic loss along one axis for every candidate order of that axis.

    For each row of ``perms`` the fibers along ``axis`` are reordered by the
    permutation and fitted independently; the summed loss is a lower bound on
    the grid problem for any combination that uses this order.
    """
    cdef Py_ssize_t d = len(shape), a, p, f, k
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t s = shape[axis]
    cdef Py_ssize_t stride = 1
    for a in range(axis + 1, d):
        stride *= shape[a]
    cdef Py_ssize_t nfib = n // s
    cdef Py_ssize_t nperm = perms.shape[0]
    out = np.zeros(nperm)
    cdef double[::1] o = out
    cdef double[::1] ys = np.empty(s)
    cdef double[::1] ws = np.empty(s)
    cdef Py_ssize_t base, outer, inner
    cdef double total
    if s > 64:
        raise ValueError("action count above 64 is not supported")
    for p in range(nperm):
        total = 0.0
        for f in range(nfib):
            outer = f // stride
            inner = f % stride
            base = outer * stride * s + inner
            for k in range(s):
                ys[k] = y[base + perms[p, k] * stride]
                ws[k] = w[base + perms[p, k] * stride]
            total += _pava_loss(&ys[0], &ws[0], s, 1)
        o[p] = total
    return out


def grid_edges(shape):
    """Edges (lo, hi) of the product-of-chains order on a C-ordered grid."""
    shape = tuple(int(s) for s in shape)
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    edges = []
    for a in range(len(shape)):
        lo = np.take(idx, np.arange(shape[a] - 1), axis=a).ravel()
        hi = np.take(idx, np.arange(1, shape[a]), axis=a).ravel()
        edges.append(np.stack([lo, hi], axis=1))
    if not edges:
        return np.zeros((0, 2), dtype=np.int64)
    return np.ascontiguousarray(np.concatenate(edges).astype(np.int64))


cdef int _cholesky_solve(double[:, ::1] G, cnp.int64_t* P, Py_ssize_t k,
                         const double* rhs, double* z, double[:, ::1] L) noexcept nogil:
    # returns index in P of a degenerate pivot, or -1 on success
    cdef Py_ssize_t i, j, t
    cdef double s
    for i in range(k):
        for j in range(i + 1):
            s = G[P[i], P[j]]
            for t in range(j):
                s -= L[i, t] * L[j, t]
            if i == j:
                if s <= 1e-12 * G[P[i], P[i]]:
                    return <int>i
                L[i, i] = sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    for i in range(k):
        s = rhs[P[i]]
        for t in range(i):
            s -= L[i, t] * z[t]
        z[i] = s / L[i, i]
    for i in range(k - 1, -1, -1):
        s = z[i]
        for t in range(i + 1, k):
            s -= L[t, i] * z[t]
        z[i] = s / L[i, i]
    return -1


cdef double _solve_grid(double[::1] y, double[::1] w, cnp.int64_t[:, ::1] E,
                        double[::1] x, double[:, ::1] G, double[::1] c, double[::1] lam,
                        double[::1] grad, double[::1] z, double[:, ::1] L,
                        cnp.int64_t[::1] P, cnp.uint8_t[::1] inP, double tol,
                        int* iters_out) noexcept nogil:
    cdef Py_ssize_t n = y.shape[0], m = E.shape[0]
    cdef Py_ssize_t e, f, i, k = 0, best, it = 0, inner, t, maxit = 3 * m + 10
    cdef double v, bestv, alpha, a, loss = 0.0
    cdef int bad
    cdef cnp.int64_t ie, je, i_f, j_f
    for e in range(m):
        ie = E[e, 0]
        je = E[e, 1]
        c[e] = y[ie] - y[je]
        lam[e] = 0.0
        inP[e] = 0
        for f in range(e + 1):
            i_f = E[f, 0]
            j_f = E[f, 1]
            v = 0.0
            if ie == i_f:
                v += 1.0 / w[ie]
            if ie == j_f:
                v -= 1.0 / w[ie]
            if je == i_f:
                v -= 1.0 / w[je]
            if je == j_f:
                v += 1.0 / w[je]
            G[e, f] = v
            G[f, e] = v
    for e in range(m):
        grad[e] = c[e]
    while it < maxit:
        it += 1
        best = -1
        bestv = tol
        for e in range(m):
            if not inP[e] and grad[e] > bestv:
                bestv = grad[e]
                best = e
        if best < 0:
            break
        P[k] = best
        inP[best] = 1
        k += 1
        inner = 0
        while True:
            inner += 1
            bad = _cholesky_solve(G, &P[0], k, &c[0], &z[0], L)
            if bad >= 0:
                # dependent column; drop the newest entry and stop adding it
                k -= 1
                inP[P[k]] = 0
                grad[P[k]] = -INFINITY
                break
            alpha = 2.0
            for t in range(k):
                if z[t] <= 0.0:
                    a = lam[P[t]] / (lam[P[t]] - z[t])
                    if a < alpha:
                        alpha = a
            if alpha >= 2.0:
                for t in range(k):
                    lam[P[t]] = z[t]
                break
            for t in range(k):
                lam[P[t]] += alpha * (z[t] - lam[P[t]])
            f = 0
            for t in range(k):
                if lam[P[t]] > 1e-15:
                    P[f] = P[t]
                    f += 1
                else:
                    lam[P[t]] = 0.0
                    inP[P[t]] = 0
            k = f
            if k == 0 or inner > m + 5:
                break
        for e in range(m):
            if inP[e] or grad[e] != -INFINITY:
                v = c[e]
                for t in range(k):
                    v -= G[e, P[t]] * lam[P[t]]
                grad[e] = v
    for i in range(n):
        x[i] = y[i]
    for e in range(m):
        if lam[e] != 0.0:
            x[E[e, 0]] -= lam[e] / w[E[e, 0]]
            x[E[e, 1]] += lam[e] / w[E[e, 1]]
    for i in range(n):
        loss += w[i] * (x[i] - y[i]) * (x[i] - y[i])
    iters_out[0] = <int>it
    return loss


cdef class _Workspace:
    cdef public object E, G, c, lam, grad, z, L, P, inP

    def __init__(self, shape):
        E = grid_edges(shape)
        m = E.shape[0]
        self.E = E
        self.G = np.zeros((max(m, 1), max(m, 1)))
        self.c = np.zeros(max(m, 1))
        self.lam = np.zeros(max(m, 1))
        self.grad = np.zeros(max(m, 1))
        self.z = np.zeros(max(m, 1))
        self.L = np.zeros((max(m, 1), max(m, 1)))
        self.P = np.zeros(max(m, 1), dtype=np.int64)
        self.inP = np.zeros(max(m, 1), dtype=np.uint8)


def grid_isotonic(y, w, shape, double tol=1e-10):
    """Weighted isotonic fit of a flat C-ordered tensor, monotone on every axis.

    Returns (fitted flat array, weighted squared error, active-set iterations).
    """
    cdef double[::1] yv = np.array(y, dtype=np.float64).ravel()
    cdef double[::1] wv = np.array(w, dtype=np.float64).ravel()
    ws = _Workspace(shape)
    x = np.empty(yv.shape[0])
    cdef int iters = 0
    cdef double scale = 1.0 + np.max(np.abs(y))
    if ws.E.shape[0] == 0:
        return np.array(yv), 0.0, 0
    loss = _solve_grid(yv, wv, ws.E, x, ws.G, ws.c, ws.lam, ws.grad, ws.z, ws.L,
                       ws.P, ws.inP, tol * scale, &iters)
    return x, loss, iters


def search_orders(y, w, shape, perm_tables, const cnp.int64_t[:, ::1] combos,
                  const double[::1] bounds, double rtol, double atol, double tol=1e-10):
    """Solve the grid problem for order combinations in ascending bound order.

    ``combos[c, a]`` indexes a row of ``perm_tables[a]``; rows must be sorted
    by ``bounds``.  Stops once a bound exceeds the incumbent by more than the
    tolerance.  Returns (best loss, list of (combo row, fitted flat tensor in
    the original layout, loss), number of solves).
    """
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64).ravel()
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64).ravel()
    shape = tuple(int(s) for s in shape)
    cdef Py_ssize_t d = len(shape), n = yv.shape[0], nc = combos.shape[0]
    cdef Py_ssize_t a, p, r, q, coord
    strides = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * shape[a + 1]
    cdef cnp.int64_t[::1] st = strides
    cdef cnp.int64_t[::1] shp = np.asarray(shape, dtype=np.int64)
    tables = [np.ascontiguousarray(t, dtype=np.int64) for t in perm_tables]
    ws = _Workspace(shape)
    ys_arr = np.empty(n)
    ws_arr = np.empty(n)
    xs_arr = np.empty(n)
    idx_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] ys = ys_arr
    cdef double[::1] wsv = ws_arr
    cdef double[::1] xs = xs_arr
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef const cnp.int64_t[:, ::1] tab
    cdef double best = INFINITY, loss, scale = 1.0 + np.max(np.abs(y))
    cdef int iters = 0
    cdef Py_ssize_t solves = 0
    found = []
    for r in range(nc):
        if bounds[r] > best + rtol * fabs(best) + atol:
            break
        for p in range(n):
            idx[p] = 0
        for a in range(d):
            tab = tables[a]
            for p in range(n):
                coord = (p // st[a]) % shp[a]
                idx[p] += tab[combos[r, a], coord] * st[a]
        for p in range(n):
            ys[p] = yv[idx[p]]
            wsv[p] = wv[idx[p]]
        if ws.E.shape[0] == 0:
            for p in range(n):
                xs[p] = ys[p]
            loss = 0.0
        else:
            loss = _solve_grid(ys, wsv, ws.E, xs, ws.G, ws.c, ws.lam, ws.grad, ws.z,
                               ws.L, ws.P, ws.inP, tol * scale, &iters)
        solves += 1
        if loss <= best + rtol * fabs(best) + atol:
            xo = np.empty(n)
            xo[idx_arr] = xs_arr
            found.append((r, xo, loss))
            if loss < best:
                best = loss
    keep = [f for f in found if f[2] <= best + rtol * fabs(best) + atol]
    return best, keep, solves

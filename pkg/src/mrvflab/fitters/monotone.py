"""Monotone (ideal QMIX family) fits by search over per-agent action orders.

A monotone surrogate is a function of the per-agent values, so for each agent
there is a total order on actions along which every slice is nondecreasing.
For a fixed combination of orders the best fit is a weighted isotonic
regression on the product-of-chains grid.  The exhaustive backend solves that
convex problem for every combination (with a lower-bound prune and symmetry
reduction) and keeps all global minimizers.
"""
from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from .. import kernels
from ..payoff import JointPayoff, check_action
from ..policy import JointPolicy, uniform, weights as policy_weights
from .base import (EXHAUSTIVE, GRADIENT, IDEAL_QMIX, WQMIX, FactorizedFit, FitConfig,
                   OrderBudgetExceeded, dominance_ranks, greedy_from_q, slices,
                   weighted_loss)

_RTOL = 1e-9


def interchangeable_classes(target: np.ndarray, w: np.ndarray, axis: int, pinned=()) -> list:
    """Groups of an agent's actions whose target and weight slices coincide."""
    ts, ws = slices(target, axis), slices(w, axis)
    groups = {}
    for a in range(target.shape[axis]):
        key = ("pinned", a) if a in pinned else (ts[a].tobytes(), ws[a].tobytes())
        groups.setdefault(key, []).append(a)
    return sorted(groups.values())


def canonical_orders(n: int, classes: list, required: Optional[int] = None) -> np.ndarray:
    """Ascending action orders, keeping interchangeable actions in index order
    and the required action (if any) on top."""
    rank_in_class = {}
    for cls in classes:
        for k, a in enumerate(cls):
            rank_in_class[a] = (cls[0], k)
    out = []
    for perm in itertools.permutations(range(n)):
        if required is not None and perm[-1] != required:
            continue
        seen = {}
        ok = True
        for a in perm:
            root, k = rank_in_class[a]
            if seen.get(root, -1) != k - 1:
                ok = False
                break
            seen[root] = k
        if ok:
            out.append(perm)
    return np.array(out, dtype=np.int64).reshape(len(out), n)


def _count_orders(n, classes, required):
    sizes = [len(c) for c in classes]
    if required is None:
        return math.factorial(n) // math.prod(math.factorial(s) for s in sizes)
    return math.factorial(n - 1) // math.prod(math.factorial(s) for s in sizes)


def _symmetric_images(x: np.ndarray, classes_per_agent: list, scale: float) -> list:
    """All tensors obtained by permuting interchangeable action slices of x."""
    images = {_key(x, scale): x}
    for axis, classes in enumerate(classes_per_agent):
        for cls in classes:
            if len(cls) < 2:
                continue
            new = {}
            for img in images.values():
                moved = np.moveaxis(img, axis, 0)
                for arr in itertools.permutations(cls):
                    m = moved.copy()
                    m[list(cls)] = moved[list(arr)]
                    out = np.moveaxis(m, 0, axis)
                    new.setdefault(_key(out, scale), out)
            images.update(new)
    return list(images.values())


def _key(x, scale):
    return np.round(x / scale, 8).tobytes()


def monotone_minimizers(target: np.ndarray, w: np.ndarray, config: FitConfig = FitConfig(),
                        required=None) -> tuple:
    """Global minimizers of sum w (x - target)^2 over monotone tensors x.

    With ``required`` the search is restricted to fits whose greedy set
    contains that joint action.  Returns (list of tensors, loss, stats).
    """
    target = np.asarray(target, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("exhaustive monotone fitting needs strictly positive weights")
    shape = target.shape
    if required is not None:
        required = check_action(shape, required)
    classes, tables = [], []
    count = 1
    for i, n in enumerate(shape):
        pinned = () if required is None else (required[i],)
        cls = interchangeable_classes(target, w, i, pinned)
        classes.append(cls)
        count *= _count_orders(n, cls, None if required is None else required[i])
    if count > config.order_budget:
        raise OrderBudgetExceeded(count, config.order_budget)
    for i, n in enumerate(shape):
        tables.append(canonical_orders(n, classes[i], None if required is None else required[i]))
    y = np.ascontiguousarray(target.ravel())
    wf = np.ascontiguousarray(w.ravel())
    per_axis = [kernels.axis_order_bounds(y, wf, shape, i, tables[i]) for i in range(len(shape))]
    grids = np.meshgrid(*[np.arange(len(t)) for t in tables], indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    bounds = np.max(np.stack([per_axis[i][combos[:, i]] for i in range(len(shape))]), axis=0)
    order = np.argsort(bounds, kind="stable")
    combos = np.ascontiguousarray(combos[order])
    bounds = np.ascontiguousarray(bounds[order])
    atol = 1e-9 * (1.0 + float(np.sum(wf * y * y)))
    best, found, solves = kernels.search_orders(y, wf, shape, tables, combos, bounds, _RTOL, atol)
    scale = 1.0 + float(np.max(np.abs(y)))
    sols = {}
    for _, xo, _ in found:
        x = xo.reshape(shape)
        for img in _symmetric_images(x, classes, scale):
            sols.setdefault(_key(img, scale), img)
    stats = {"combinations": int(count), "solved": int(solves)}
    return list(sols.values()), float(best), stats


def _orders_from(x: np.ndarray, prev_orders, required) -> list:
    out = []
    for i in range(x.ndim):
        means = slices(x, i).mean(axis=1)
        pos = {a: k for k, a in enumerate(prev_orders[i])}
        order = sorted(range(x.shape[i]), key=lambda a: (means[a], pos[a]))
        if required is not None:
            order.remove(required[i])
            order.append(required[i])
        out.append(tuple(order))
    return out


def monotone_local_fit(target: np.ndarray, w: np.ndarray, config: FitConfig = FitConfig(),
                       required=None):
    """Alternate between fixing orders and solving the grid problem.

    Returns (tensor, loss, converged, iterations); only a local solution.
    """
    target = np.asarray(target, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        # zero weights leave entries free; a tiny floor keeps the grid solver well posed
        w = np.maximum(w, 1e-12 * max(float(w.max()), 1.0))
    shape = target.shape
    if required is not None:
        required = check_action(shape, required)
    start = []
    for i in range(target.ndim):
        means = slices(target * w, i).sum(axis=1) / slices(w, i).sum(axis=1)
        start.append(tuple(sorted(range(shape[i]), key=lambda a: (means[a], a))))
    orders = start
    if required is not None:
        orders = [tuple([a for a in o if a != r] + [r]) for o, r in zip(start, required)]
    grid = np.arange(target.size).reshape(shape)
    seen = set()
    best = None
    for it in range(1, config.max_iters + 1):
        idx = grid[np.ix_(*[list(o) for o in orders])].ravel()
        xs, loss, _ = kernels.grid_isotonic(target.ravel()[idx], w.ravel()[idx], shape)
        x = np.empty(target.size)
        x[idx] = xs
        x = x.reshape(shape)
        if best is None or loss < best[1] - 1e-12:
            best = (x, loss)
        seen.add(tuple(orders))
        new = _orders_from(x, orders, required)
        if tuple(new) in seen:
            return best[0], best[1], tuple(new) == tuple(orders), it
        orders = new
    return best[0], best[1], False, config.max_iters


def _make_fit(scheme, x, target, w, backend, aux, converged=True, iterations=0):
    q = dominance_ranks(x)
    return FactorizedFit(scheme=scheme, per_agent_q=q, q_tot=x, loss=weighted_loss(x, target, w),
                         greedy_set=greedy_from_q(q), auxiliary=dict(aux), backend=backend,
                         converged=converged, iterations=iterations)


def _sorted(fits):
    return sorted(fits, key=lambda f: (f.greedy_set, f.q_tot.ravel().tolist()))


def monotone_fits(scheme, target, w, config: FitConfig, required=None, aux=None) -> list:
    """All minimizing fits (exhaustive) or the single local fit (gradient)."""
    aux = aux or {}
    if config.backend == EXHAUSTIVE:
        xs, _, stats = monotone_minimizers(target, w, config, required)
        fits = [_make_fit(scheme, x, target, w, EXHAUSTIVE, {**aux, **stats}) for x in xs]
        fits = _sorted(fits)
        for f in fits:
            f.auxiliary["n_minimizers"] = len(fits)
        return fits
    x, _, conv, its = monotone_local_fit(target, w, config, required)
    return [_make_fit(scheme, x, target, w, GRADIENT, aux, conv, its)]


def ideal_qmix_minimizers(payoff: JointPayoff, policy: JointPolicy = None,
                          config: FitConfig = FitConfig(), required_greedy=None) -> list:
    policy = policy or uniform()
    w = policy_weights(policy, payoff.action_counts)
    return monotone_fits(IDEAL_QMIX, payoff.values, w, config, required_greedy)


def fit_ideal_qmix(payoff: JointPayoff, policy: JointPolicy = None,
                   config: FitConfig = FitConfig()) -> FactorizedFit:
    """Best monotone surrogate under the policy's visitation weights."""
    return ideal_qmix_minimizers(payoff, policy, config)[0]


def fit_ideal_qmix_constrained(payoff: JointPayoff, policy: JointPolicy = None,
                               required_greedy=None, config: FitConfig = FitConfig()) -> FactorizedFit:
    """Best monotone surrogate whose greedy set contains ``required_greedy``."""
    return ideal_qmix_minimizers(payoff, policy, config, required_greedy)[0]


def wqmix_weights(q_hat: JointPayoff, tilde_u, alpha: float) -> np.ndarray:
    """1 where q_hat beats q_hat(tilde_u) strictly or at tilde_u itself, alpha elsewhere."""
    tilde_u = check_action(q_hat.action_counts, tilde_u)
    v = q_hat.values
    w = np.where(v > v[tilde_u], 1.0, alpha)
    w[tilde_u] = 1.0
    return w


def wqmix_minimizers(payoff: JointPayoff, q_hat: Optional[JointPayoff], tilde_u, alpha: float,
                     policy: JointPolicy = None, config: FitConfig = FitConfig(),
                     required_greedy=None) -> list:
    q_hat = payoff if q_hat is None else q_hat
    if q_hat.action_counts != payoff.action_counts:
        raise ValueError("q_hat and payoff shapes differ")
    policy = (policy or uniform()).with_reference(tilde_u)
    ww = wqmix_weights(q_hat, tilde_u, alpha)
    w = ww * policy_weights(policy, payoff.action_counts)
    return monotone_fits(WQMIX, payoff.values, w, config, required_greedy,
                         {"weights": ww, "tilde_u": list(tilde_u), "alpha": alpha})


def fit_wqmix(payoff: JointPayoff, q_hat: Optional[JointPayoff], tilde_u, alpha: float,
              policy: JointPolicy = None, config: FitConfig = FitConfig(),
              required_greedy=None) -> FactorizedFit:
    """Weighted monotone fit: weights from q_hat around tilde_u, target payoff."""
    return wqmix_minimizers(payoff, q_hat, tilde_u, alpha, policy, config, required_greedy)[0]

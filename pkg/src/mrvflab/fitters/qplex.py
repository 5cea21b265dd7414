"""QPLEX dueling-form fits with free nonnegative per-agent weights.

q_tot(u) = sum_i max Q_i + sum_i w_i(u) (Q_i(u_i) - max Q_i), w_i >= 0.
The max term is a gradient-free component: it is evaluated at the current
per-agent argmax and held fixed when differentiating.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..payoff import JointPayoff
from ..policy import JointPolicy, uniform, weights as policy_weights
from .base import GRADIENT, QPLEX, ConvergenceError, FactorizedFit, FitConfig, greedy_from_q


def _expand(q, i, ndim):
    return np.asarray(q, dtype=float).reshape([-1 if j == i else 1 for j in range(ndim)])


def qplex_qtot(per_agent_q, per_agent_w) -> np.ndarray:
    n = len(per_agent_q)
    tot = sum(float(np.max(q)) for q in per_agent_q)
    for i, (q, w) in enumerate(zip(per_agent_q, per_agent_w)):
        q = np.asarray(q, dtype=float)
        tot = tot + np.asarray(w) * (_expand(q, i, n) - q.max())
    return np.asarray(tot, dtype=float)


def qplex_gradients(payoff: JointPayoff, per_agent_q, per_agent_w, policy: JointPolicy = None):
    """Loss gradients (without the factor 2) w.r.t. Q_i and w_i.

    Returns (list of dL/dQ_i vectors, list of dL/dw_i tensors, residual tensor).
    """
    pi = policy_weights(policy or uniform(), payoff.action_counts)
    n = payoff.n_agents
    r = pi * (qplex_qtot(per_agent_q, per_agent_w) - payoff.values)
    gq, gw = [], []
    for i, (q, w) in enumerate(zip(per_agent_q, per_agent_w)):
        q = np.asarray(q, dtype=float)
        w = np.asarray(w, dtype=float)
        bar = int(np.argmax(q))
        other = tuple(j for j in range(n) if j != i)
        g = np.sum(r * w, axis=other) if other else r * w
        g = np.array(g, dtype=float).reshape(-1)
        g[bar] += float(np.sum(r * (1.0 - w)))
        gq.append(g)
        gw.append(r * (_expand(q, i, n) - q[bar]))
    return gq, gw, r


@dataclass
class QplexStationarity:
    max_abs_grad_q: float
    min_grad_w_positive: float
    complementarity_violations: int
    residual: float
    stationary: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def qplex_stationarity_check(payoff: JointPayoff, per_agent_q, per_agent_w,
                             policy: JointPolicy = None, tol: float = 1e-4) -> QplexStationarity:
    """Stationarity: |dL/dQ| <= tol and, for the weights, dL/dw >= -tol with
    dL/dw > tol only where w is (numerically) zero."""
    for w in per_agent_w:
        if np.any(np.asarray(w) < 0):
            raise ValueError("QPLEX weights must be nonnegative")
    gq, gw, _ = qplex_gradients(payoff, per_agent_q, per_agent_w, policy)
    max_q = max(float(np.max(np.abs(g))) for g in gq)
    pos = [g[np.asarray(w) > 0] for g, w in zip(gw, per_agent_w)]
    pos = np.concatenate([p.ravel() for p in pos]) if pos else np.zeros(0)
    min_pos = float(pos.min()) if pos.size else 0.0
    nat = max(float(np.max(np.abs(np.minimum(np.asarray(w), g)))) for g, w in zip(gw, per_agent_w))
    viol = sum(int(np.sum((g < -tol) | ((g > tol) & (np.asarray(w) > tol))))
               for g, w in zip(gw, per_agent_w))
    residual = max(max_q, nat)
    return QplexStationarity(max_q, min_pos, viol, residual, residual <= tol)


def _residual(gq, gw, ws):
    return max(max(float(np.max(np.abs(g))) for g in gq),
               max(float(np.max(np.abs(np.minimum(w, g)))) for g, w in zip(gw, ws)))


def _loss(payoff, pi, qs, ws):
    return float(np.sum(pi * (qplex_qtot(qs, ws) - payoff.values) ** 2))


def random_init(payoff: JointPayoff, rng: np.random.Generator):
    scale = 1.0 + float(np.std(payoff.values))
    qs = [rng.normal(0.0, scale, n) for n in payoff.action_counts]
    ws = [rng.uniform(0.5, 1.5, payoff.action_counts) for _ in payoff.action_counts]
    return qs, ws


def fit_qplex(payoff: JointPayoff, policy: JointPolicy = None, init=None,
              config: FitConfig = FitConfig(tolerance=1e-4)) -> FactorizedFit:
    """Projected gradient descent with Armijo backtracking to a stationary point.

    ``init`` is (list of Q_i vectors, list of w_i tensors) or None for a seeded
    random start.  Raises ConvergenceError if the residual stays above
    config.tolerance after config.max_iters steps.
    """
    policy = policy or uniform()
    pi = policy_weights(policy, payoff.action_counts)
    if init is None:
        qs, ws = random_init(payoff, np.random.default_rng(config.seed))
    else:
        qs = [np.array(q, dtype=float).reshape(n) for q, n in zip(init[0], payoff.action_counts)]
        ws = [np.array(w, dtype=float).reshape(payoff.action_counts) for w in init[1]]
        if len(qs) != payoff.n_agents or len(ws) != payoff.n_agents:
            raise ValueError("init needs one Q vector and one weight tensor per agent")
        if any(np.any(w < 0) for w in ws):
            raise ValueError("QPLEX weights must be nonnegative")
    step = 1e-2
    loss = _loss(payoff, pi, qs, ws)
    res = np.inf
    it = 0
    for it in range(1, config.max_iters + 1):
        gq, gw, _ = qplex_gradients(payoff, qs, ws, policy)
        res = _residual(gq, gw, ws)
        if res <= config.tolerance:
            break
        step = min(step * 2.0, 1e3)
        while True:
            nq = [q - step * 2.0 * g for q, g in zip(qs, gq)]
            nw = [np.maximum(w - step * 2.0 * g, 0.0) for w, g in zip(ws, gw)]
            moved = sum(float(np.sum((a - b) ** 2)) for a, b in zip(nq + nw, qs + ws))
            new_loss = _loss(payoff, pi, nq, nw)
            if new_loss <= loss - 0.25 * moved / step or step < 1e-14:
                break
            step *= 0.5
        qs, ws, loss = nq, nw, new_loss
    else:
        raise ConvergenceError(f"QPLEX descent did not reach tolerance {config.tolerance} "
                               f"in {config.max_iters} steps (residual {res:.3g})",
                               {"residual": res, "loss": loss})
    q_tot = qplex_qtot(qs, ws)
    return FactorizedFit(QPLEX, tuple(qs), q_tot, _loss(payoff, pi, qs, ws), greedy_from_q(qs, 0.0),
                         {"weights": ws}, GRADIENT, True, it)

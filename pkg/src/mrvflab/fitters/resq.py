"""Zero-loss ResQ fits built constructively.

ResQ writes q_tot = Q_mon + w_r * Q_r with Q_r <= 0 and a mask w_r that is 0
at the reference action and 1 elsewhere, so any Q_mon that dominates the
payoff and matches it at the reference yields an exact fit.
"""
from typing import Optional

import numpy as np

from ..payoff import JointPayoff, check_action
from ..policy import JointPolicy, uniform, weights as policy_weights
from .base import EXHAUSTIVE, RESQ, FactorizedFit, dominance_ranks, greedy_from_q, slices, weighted_loss


def residual_mask(shape, tilde_u) -> np.ndarray:
    w_r = np.ones(shape)
    w_r[tuple(tilde_u)] = 0.0
    return w_r


def _is_monotone(x: np.ndarray) -> bool:
    for i in range(x.ndim):
        s = slices(x, i)
        geq = np.all(s[:, None, :] >= s[None, :, :], axis=2)
        if not np.all(geq | geq.T):
            return False
    return True


def _fit(payoff, tilde_u, q_mon, per_agent_q, policy, role):
    v = payoff.values
    w_r = residual_mask(v.shape, tilde_u)
    q_r = v - q_mon
    q_r[tuple(tilde_u)] = min(0.0, q_r[tuple(tilde_u)])
    q_tot = q_mon + w_r * q_r
    w = policy_weights((policy or uniform()).with_reference(tilde_u), v.shape)
    aux = {"q_mon": q_mon, "q_r": q_r, "w_r": w_r, "tilde_u": list(tilde_u), "role": role}
    return FactorizedFit(RESQ, per_agent_q, q_tot, weighted_loss(q_tot, v, w),
                         greedy_from_q(per_agent_q), aux, EXHAUSTIVE, True, 0)


def resq_staying_fit(payoff: JointPayoff, tilde_u, policy: JointPolicy = None) -> Optional[FactorizedFit]:
    """Constant Q_mon at the reference value with greedy set {tilde_u} (the
    whole space for a constant payoff).

    Exists only when tilde_u maximizes the payoff; returns None otherwise.
    """
    tilde_u = check_action(payoff.action_counts, tilde_u)
    v = payoff.values
    if v[tilde_u] < v.max():
        return None
    q_mon = np.full(v.shape, v[tilde_u])
    if v.min() == v.max():
        # every action is optimal, so nothing pins the per-agent argmax
        per_agent = tuple(np.zeros(n) for n in v.shape)
    else:
        per_agent = tuple((np.arange(n) == a).astype(float) for n, a in zip(v.shape, tilde_u))
    return _fit(payoff, tilde_u, q_mon, per_agent, policy, "stay")


def resq_leaving_fit(payoff: JointPayoff, tilde_u, policy: JointPolicy = None, margin: float = 1.0,
                     leave_to=None) -> Optional[FactorizedFit]:
    """Zero-loss fit whose greedy set excludes tilde_u.

    Default: Q_mon equals the payoff at tilde_u and max + margin elsewhere.
    With ``leave_to``: Q_mon is the payoff maximum everywhere, the payoff at
    tilde_u, and max + margin at ``leave_to``.  Returns None if no such
    construction leaves tilde_u (a single joint action).
    """
    tilde_u = check_action(payoff.action_counts, tilde_u)
    v = payoff.values
    if margin <= 0:
        raise ValueError("margin must be positive")
    top = v.max()
    if leave_to is None:
        q_mon = np.full(v.shape, top + margin)
    else:
        leave_to = check_action(v.shape, leave_to)
        if leave_to == tilde_u:
            raise ValueError("leave_to must differ from tilde_u")
        q_mon = np.full(v.shape, top)
        q_mon[leave_to] = top + margin
    q_mon[tilde_u] = v[tilde_u]
    if not _is_monotone(q_mon):
        raise ValueError("leave_to shares a component with tilde_u below the payoff maximum; "
                         "the construction is not monotone")
    per_agent = dominance_ranks(q_mon, tol=0.0)
    fit = _fit(payoff, tilde_u, q_mon, per_agent, policy, "leave")
    if tilde_u in fit.greedy_set:
        return None
    return fit


def resq_zero_loss_fits(payoff: JointPayoff, tilde_u, policy: JointPolicy = None,
                        margin: float = 1.0) -> list:
    """The constructive zero-loss fits at tilde_u (staying first when it exists)."""
    fits = [resq_staying_fit(payoff, tilde_u, policy), resq_leaving_fit(payoff, tilde_u, policy, margin)]
    return [f for f in fits if f is not None]


def fit_resq(payoff: JointPayoff, tilde_u, policy: JointPolicy = None, margin: float = 1.0) -> FactorizedFit:
    """A zero-loss fit, keeping tilde_u greedy when that is possible.

    The alternative leaving fit (if any) is attached as auxiliary["alternative"].
    """
    fits = resq_zero_loss_fits(payoff, tilde_u, policy, margin)
    main = fits[0]
    if len(fits) > 1:
        main.auxiliary["alternative"] = fits[1]
    return main

"""Additive (VDN) fits."""
import numpy as np

from ..payoff import JointPayoff
from ..policy import JointPolicy, uniform, weights as policy_weights
from .base import EXHAUSTIVE, VDN, FactorizedFit, greedy_from_q, weighted_loss


def additive_design(shape) -> np.ndarray:
    """One-hot design matrix mapping stacked per-agent vectors to the joint tensor."""
    shape = tuple(shape)
    idx = np.indices(shape).reshape(len(shape), -1)
    offsets = np.concatenate([[0], np.cumsum(shape)[:-1]])
    D = np.zeros((idx.shape[1], int(sum(shape))))
    for i in range(len(shape)):
        D[np.arange(idx.shape[1]), offsets[i] + idx[i]] = 1.0
    return D


def fit_vdn(payoff: JointPayoff, policy: JointPolicy = None) -> FactorizedFit:
    """Weighted least-squares fit of q_tot = sum_i Q_i(u_i).

    The problem is convex; the minimum-norm solution is returned.
    """
    policy = policy or uniform()
    shape = payoff.action_counts
    w = policy_weights(policy, shape)
    D = additive_design(shape)
    sw = np.sqrt(w.ravel())
    theta, *_ = np.linalg.lstsq(D * sw[:, None], payoff.values.ravel() * sw, rcond=None)
    q_tot = (D @ theta).reshape(shape)
    per_agent = tuple(np.split(theta, np.cumsum(shape)[:-1]))
    return FactorizedFit(VDN, per_agent, q_tot, weighted_loss(q_tot, payoff.values, w),
                         greedy_from_q(per_agent), {}, EXHAUSTIVE, True, 1)

"""Shared types for the factorized fitters."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ..payoff import action_set

VDN = "vdn"
IDEAL_QMIX = "idealqmix"
WQMIX = "wqmix"
RESQ = "resq"
QPLEX = "qplex"
SCHEMES = (VDN, IDEAL_QMIX, WQMIX, RESQ, QPLEX)

EXHAUSTIVE = "exhaustive"
GRADIENT = "gradient"


class FitError(Exception):
    pass


class OrderBudgetExceeded(FitError):
    """Exhaustive order search would exceed the configured budget."""

    def __init__(self, count, budget):
        super().__init__(
            f"{count} order combinations exceed the budget of {budget}; "
            "use the gradient backend or raise order_budget")
        self.count = count
        self.budget = budget


class CapabilityError(FitError):
    """The requested result needs a backend that can provide it."""


class ConvergenceError(FitError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


@dataclass(frozen=True)
class FitConfig:
    backend: str = EXHAUSTIVE
    order_budget: int = 10 ** 6
    tolerance: float = 1e-8
    max_iters: int = 20000
    alpha: float = 0.1
    tie_policy: str = "lexicographic"
    seed: int = 0

    def __post_init__(self):
        if self.backend not in (EXHAUSTIVE, GRADIENT):
            raise ValueError(f"unknown backend {self.backend!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.tie_policy != "lexicographic":
            raise ValueError("only lexicographic tie policy is supported")

    def with_(self, **kw) -> "FitConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FactorizedFit:
    scheme: str
    per_agent_q: tuple
    q_tot: np.ndarray
    loss: float
    greedy_set: tuple
    auxiliary: dict = field(default_factory=dict)
    backend: str = EXHAUSTIVE
    converged: bool = True
    iterations: int = 0

    @property
    def mean_loss(self) -> float:
        """Loss divided by the number of joint actions."""
        return self.loss / self.q_tot.size

    def contains(self, action) -> bool:
        return tuple(action) in self.greedy_set

    def to_dict(self) -> dict:
        aux = {}
        for k, v in self.auxiliary.items():
            if isinstance(v, FactorizedFit):
                aux[k] = v.to_dict()
            elif isinstance(v, np.ndarray):
                aux[k] = v.tolist()
            elif isinstance(v, (list, tuple)) and v and isinstance(v[0], np.ndarray):
                aux[k] = [a.tolist() for a in v]
            else:
                aux[k] = v
        return {
            "scheme": self.scheme,
            "loss": float(self.loss),
            "mean_loss": float(self.mean_loss),
            "per_agent_q": [np.asarray(q).tolist() for q in self.per_agent_q],
            "q_tot": self.q_tot.tolist(),
            "greedy_set": [list(u) for u in self.greedy_set],
            "auxiliary": aux,
            "backend": self.backend,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }


def argmax_indices(q, tol: float = 1e-9) -> list:
    q = np.asarray(q, dtype=float)
    top = q.max()
    return [int(a) for a in np.flatnonzero(q >= top - tol * (1.0 + abs(top)))]


def greedy_from_q(per_agent_q, tol: float = 1e-9) -> tuple:
    """Cartesian product of per-agent argmax sets."""
    return action_set(itertools.product(*(argmax_indices(q, tol) for q in per_agent_q)))


def slices(x: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(x, axis, 0).reshape(x.shape[axis], -1)


def dominance_ranks(x: np.ndarray, tol: Optional[float] = None) -> tuple:
    """Per-agent integer scores: the number of slices each action slice strictly
    dominates.  Equal slices get equal scores, so the argmax of each vector is
    the set of dominating slices."""
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.max(np.abs(x))))
    out = []
    for i in range(x.ndim):
        s = slices(x, i)
        geq = np.all(s[:, None, :] >= s[None, :, :] - tol, axis=2)
        strict = geq & ~geq.T
        out.append(strict.sum(axis=1).astype(float))
    return tuple(out)


def weighted_loss(q_tot, target, w) -> float:
    return float(np.sum(w * (np.asarray(q_tot) - np.asarray(target)) ** 2))

"""Visitation weights over joint actions used inside the fitting losses."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

UNIFORM = "uniform"
DEC_EPS = "dec_eps"
CEN_EPS = "cen_eps"
KINDS = (UNIFORM, DEC_EPS, CEN_EPS)


class UnsupportedShapeError(ValueError):
    pass


@dataclass(frozen=True)
class JointPolicy:
    """Uniform (weight 1 everywhere) or an epsilon-greedy distribution around a
    reference joint action.  Epsilon-greedy policies may be created without a
    reference and bound later with ``with_reference``."""

    kind: str = UNIFORM
    epsilon: float = 0.0
    reference: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.kind == UNIFORM and self.reference is not None:
            raise ValueError("uniform policy takes no reference")
        if self.reference is not None:
            object.__setattr__(self, "reference", tuple(int(a) for a in self.reference))

    @property
    def is_greedy(self) -> bool:
        return self.kind != UNIFORM

    def with_reference(self, reference) -> "JointPolicy":
        if self.kind == UNIFORM:
            return self
        return replace(self, reference=tuple(int(a) for a in reference))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind != UNIFORM:
            d["epsilon"] = self.epsilon
            if self.reference is not None:
                d["reference"] = list(self.reference)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "JointPolicy":
        ref = d.get("reference")
        return cls(d["kind"], float(d.get("epsilon", 0.0)),
                   tuple(ref) if ref is not None else None)


def uniform() -> JointPolicy:
    return JointPolicy(UNIFORM)


def centralized(epsilon: float, reference=None) -> JointPolicy:
    return JointPolicy(CEN_EPS, epsilon, reference)


def decentralized(epsilon: float, reference=None) -> JointPolicy:
    return JointPolicy(DEC_EPS, epsilon, reference)


def _need_reference(policy):
    if policy.reference is None:
        raise ValueError(f"{policy.kind} policy needs a reference action")
    return policy.reference


def weight(policy: JointPolicy, action, shape) -> float:
    """Visitation weight of a single joint action."""
    shape = tuple(shape)
    action = tuple(action)
    if policy.kind == UNIFORM:
        return 1.0
    ref = _need_reference(policy)
    eps = policy.epsilon
    if policy.kind == CEN_EPS:
        total = float(np.prod(shape))
        return (1.0 - eps + eps / total) if action == ref else eps / total
    if len(set(shape)) != 1:
        raise UnsupportedShapeError("decentralized epsilon-greedy needs equal action counts")
    n_u = shape[0]
    m = sum(a == r for a, r in zip(action, ref))
    return (eps / n_u) ** (len(shape) - m) * (1.0 - eps + eps / n_u) ** m


def weights(policy: JointPolicy, shape) -> np.ndarray:
    """Weight tensor over the joint action space."""
    shape = tuple(shape)
    if policy.kind == UNIFORM:
        return np.ones(shape)
    ref = _need_reference(policy)
    eps = policy.epsilon
    if policy.kind == CEN_EPS:
        total = float(np.prod(shape))
        w = np.full(shape, eps / total)
        w[ref] = 1.0 - eps + eps / total
        return w
    if len(set(shape)) != 1:
        raise UnsupportedShapeError("decentralized epsilon-greedy needs equal action counts")
    n_u = shape[0]
    w = np.ones(shape)
    for i, r in enumerate(ref):
        marg = np.full(n_u, eps / n_u)
        marg[r] += 1.0 - eps
        w = w * marg.reshape([-1 if j == i else 1 for j in range(len(shape))])
    return w


def sample(policy: JointPolicy, shape, rng: np.random.Generator) -> tuple:
    """Draw one joint action from an epsilon-greedy policy (uniform if kind is uniform)."""
    shape = tuple(shape)
    if policy.kind == UNIFORM:
        return tuple(int(rng.integers(n)) for n in shape)
    ref = _need_reference(policy)
    if policy.kind == CEN_EPS:
        if rng.random() < policy.epsilon:
            return tuple(int(rng.integers(n)) for n in shape)
        return ref
    return tuple(int(rng.integers(n)) if rng.random() < policy.epsilon else int(r)
                 for n, r in zip(shape, ref))

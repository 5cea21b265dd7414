"""Joint payoff tensors, joint-action indexing and the built-in matrix corpus."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

JointAction = tuple  # tuple[int, ...], 0-based per-agent action indices


class InvalidActionError(ValueError):
    pass


class PayoffValidationError(ValueError):
    pass


def action_set(actions: Iterable[Sequence[int]]) -> tuple:
    """Deduplicated, lexicographically sorted tuple of joint actions."""
    return tuple(sorted({tuple(int(a) for a in u) for u in actions}))


@dataclass(frozen=True)
class JointPayoff:
    """Dense payoff tensor with one axis per agent (row-major, last agent fastest)."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim < 1:
            raise PayoffValidationError("payoff needs at least one agent axis")
        if any(s < 1 for s in v.shape):
            raise PayoffValidationError("every agent needs at least one action")
        if not np.all(np.isfinite(v)):
            raise PayoffValidationError("payoff entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_flat(cls, action_counts, values, label=""):
        counts = tuple(int(c) for c in action_counts)
        flat = np.asarray(values, dtype=float).ravel()
        if len(counts) < 1 or flat.size != int(np.prod(counts)):
            raise PayoffValidationError(
                f"{flat.size} values do not fill action counts {counts}")
        return cls(flat.reshape(counts), label)

    @property
    def action_counts(self) -> tuple:
        return self.values.shape

    @property
    def n_agents(self) -> int:
        return self.values.ndim

    @property
    def n_joint(self) -> int:
        return self.values.size

    def __getitem__(self, action):
        return float(self.values[tuple(action)])

    def scaled(self, c: float, shift: float = 0.0) -> "JointPayoff":
        return JointPayoff(self.values * c + shift, self.label)

    def to_dict(self) -> dict:
        d = {"action_counts": list(self.action_counts),
             "values": [float(x) for x in self.values.ravel()]}
        if self.label:
            d = {"label": self.label, **d}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "JointPayoff":
        if "action_counts" not in d or "values" not in d:
            raise PayoffValidationError("payoff JSON needs action_counts and values")
        vals = d["values"]
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in vals):
            raise PayoffValidationError("payoff values must be numbers")
        return cls.from_flat(d["action_counts"], vals, d.get("label", ""))

    def __eq__(self, other):
        return (isinstance(other, JointPayoff) and self.values.shape == other.values.shape
                and bool(np.array_equal(self.values, other.values)))

    def __hash__(self):
        return hash((self.values.shape, self.values.tobytes()))


def load_payoff(path) -> JointPayoff:
    with open(path) as fh:
        # json allows NaN/Infinity literals by default; reject them explicitly
        data = json.load(fh, parse_constant=_reject_constant)
    return JointPayoff.from_dict(data)


def _reject_constant(name):
    raise PayoffValidationError(f"non-finite value {name} in payoff")


def save_payoff(payoff: JointPayoff, path) -> None:
    with open(path, "w") as fh:
        json.dump(payoff.to_dict(), fh, indent=2)


def check_action(action_counts, action) -> JointAction:
    action = tuple(int(a) for a in action)
    if len(action) != len(action_counts):
        raise InvalidActionError(f"action {action} has wrong length for {tuple(action_counts)}")
    for a, n in zip(action, action_counts):
        if not 0 <= a < n:
            raise InvalidActionError(f"action {action} out of range for {tuple(action_counts)}")
    return action


def joint_index(payoff_or_counts, action) -> int:
    counts = _counts(payoff_or_counts)
    return int(np.ravel_multi_index(check_action(counts, action), counts))


def deindex(payoff_or_counts, index: int) -> JointAction:
    counts = _counts(payoff_or_counts)
    if not 0 <= index < int(np.prod(counts)):
        raise InvalidActionError(f"index {index} out of range")
    return tuple(int(a) for a in np.unravel_index(index, counts))


def _counts(p):
    return p.action_counts if isinstance(p, JointPayoff) else tuple(int(c) for c in p)


def all_actions(action_counts) -> list:
    return list(itertools.product(*(range(n) for n in action_counts)))


def argmax_set(payoff: JointPayoff) -> tuple:
    v = payoff.values
    return action_set(zip(*np.nonzero(v == v.max())))


def argmin_set(payoff: JointPayoff) -> tuple:
    v = payoff.values
    return action_set(zip(*np.nonzero(v == v.min())))


@dataclass(frozen=True)
class MonotonicityVerdict:
    is_monotonic: bool
    witness: Optional[dict] = None
    unordered_pair_fraction: float = 0.0


def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a >= b))


def classify_monotonicity(payoff: JointPayoff) -> MonotonicityVerdict:
    """Check whether every pair of an agent's action slices is pointwise ordered."""
    v = payoff.values
    pairs = 0
    unordered = 0
    witness = None
    for i in range(v.ndim):
        sl = np.moveaxis(v, i, 0).reshape(v.shape[i], -1)
        others = [n for j, n in enumerate(v.shape) if j != i]
        for a, b in itertools.combinations(range(v.shape[i]), 2):
            pairs += 1
            if _dominates(sl[a], sl[b]) or _dominates(sl[b], sl[a]):
                continue
            unordered += 1
            if witness is None:
                up = int(np.argmax(sl[a] > sl[b]))
                down = int(np.argmax(sl[a] < sl[b]))
                witness = {
                    "agent": i,
                    "actions": (a, b),
                    "completion_a_higher": tuple(int(x) for x in np.unravel_index(up, others)),
                    "completion_b_higher": tuple(int(x) for x in np.unravel_index(down, others)),
                }
    frac = unordered / pairs if pairs else 0.0
    return MonotonicityVerdict(witness is None, witness, frac)


def monotone_orders(payoff: JointPayoff):
    """Per-agent total orders (ascending) under which a monotonic payoff is
    nondecreasing along every axis, or None if the payoff is not monotonic."""
    v = payoff.values
    orders = []
    for i in range(v.ndim):
        sl = np.moveaxis(v, i, 0).reshape(v.shape[i], -1)
        # sorting by slice sum is consistent with pointwise domination
        order = sorted(range(v.shape[i]), key=lambda a: (sl[a].sum(), a))
        for lo, hi in zip(order, order[1:]):
            if not _dominates(sl[hi], sl[lo]):
                return None
        orders.append(tuple(order))
    return orders


def _m(rows, label):
    return JointPayoff(np.array(rows, dtype=float), label)


def pp_matrix(punishment: float, label: str = "") -> JointPayoff:
    """6x6 one-step predator-prey payoff: both capture -> 10, one capture -> punishment."""
    v = np.zeros((6, 6))
    v[0, :] = punishment
    v[:, 0] = punishment
    v[0, 0] = 10.0
    return JointPayoff(v, label or f"pp_onestep_p{abs(punishment):g}")


def example_corpus() -> dict:
    """Named example matrices (rows = agent 1 actions, columns = agent 2)."""
    table6 = [[8, -12, -12], [-12, 3, 0], [-12, 0, 5]]
    corpus = {
        "table2_qjt": _m([[4, 0, -8], [0, 3, 0], [-8, 0, -8]], "table2_qjt"),
        "table4_round1": _m(table6, "table4_round1"),
        "table4_round2": _m([[3, 0, 0], [0, 0, 0], [0, 0, 0]], "table4_round2"),
        "table4_round3": _m(np.zeros((3, 3)), "table4_round3"),
        "table5_qjt": _m(table6, "table5_qjt"),
        "table6_qjt": _m(table6, "table6_qjt"),
        "table7_qjt": _m(table6, "table7_qjt"),
        "table8_qjt": _m([[8, 0, 0], [0, 3, 0], [0, 0, 5]], "table8_qjt"),
        "table9a_riskreward": _m([[3, -4, -5], [-4, 5, -6], [-5, -6, 7]], "table9a_riskreward"),
        "table9b_riskreward": _m([[7, -6, -5], [-5, -4, 3], [-6, 5, -4]], "table9b_riskreward"),
        "table10a_monotonic": _m([[9, 8, 7], [6, 5, 4], [3, 2, 1]], "table10a_monotonic"),
        "table10b_monotonic": _m([[8, 9, 7], [2, 3, 1], [5, 6, 4]], "table10b_monotonic"),
        "table10c_nonmonotonic": _m([[9, 0, 0], [0, 5, 0], [0, 0, 0]], "table10c_nonmonotonic"),
        "table10d_highly_nonmonotonic": _m([[9, -9, -9], [-9, 5, 0], [-9, 0, 0]],
                                           "table10d_highly_nonmonotonic"),
        "table11_focus_fire": _m([[2.2, 1.1, 1.1, -0.9], [1.1, 2, 1, -1], [1.1, 1, 2, -1],
                                  [-0.9, -1, -1, -2]], "table11_focus_fire"),
        "pp_onestep_p0": pp_matrix(0.0, "pp_onestep_p0"),
        "pp_onestep_p2": pp_matrix(-2.0, "pp_onestep_p2"),
        "pp_onestep_p5": pp_matrix(-5.0, "pp_onestep_p5"),
    }
    return corpus


paper_corpus = example_corpus  # published interface name


def corpus_payoff(key: str) -> JointPayoff:
    corpus = example_corpus()
    if key not in corpus:
        raise KeyError(f"unknown corpus key {key!r}; known: {', '.join(sorted(corpus))}")
    return corpus[key]

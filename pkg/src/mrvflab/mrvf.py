"""Multi-round value factorization: clipped-increment targets, per-round
monotone fits with early termination, and a tabular training loop."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .fitters import IDEAL_QMIX, FactorizedFit, FitConfig, greedy_from_q
from .payoff import JointPayoff, action_set, argmax_set, check_action
from .policy import CEN_EPS, UNIFORM, JointPolicy, centralized, uniform
from .stability import iterate_transitions


class ContractError(ValueError):
    pass


def clipped_target(q_hat: JointPayoff, prev_greedy) -> np.ndarray:
    """max(q_hat(u) - q_hat(prev_greedy), 0) pointwise."""
    prev_greedy = check_action(q_hat.action_counts, prev_greedy)
    return np.maximum(q_hat.values - q_hat.values[prev_greedy], 0.0)


@dataclass
class RoundState:
    k: int
    prev_greedy: tuple
    target: np.ndarray
    fit: FactorizedFit
    greedy: tuple
    reference_path: list = field(default_factory=list)
    settled: bool = True

    def to_dict(self) -> dict:
        return {"k": self.k, "prev_greedy": list(self.prev_greedy),
                "target": self.target.tolist(), "greedy": list(self.greedy),
                "greedy_set": [list(u) for u in self.fit.greedy_set],
                "reference_path": [list(u) for u in self.reference_path],
                "settled": self.settled, "fit": self.fit.to_dict()}


@dataclass
class MultiRoundResult:
    rounds: list
    termination_round: int
    output: tuple
    improvement_flags: list
    early_terminated: bool
    policy: dict
    uniform_weighting: bool

    @property
    def greedy_sequence(self) -> list:
        return [r.greedy for r in self.rounds]

    def to_dict(self) -> dict:
        return {"output": list(self.output), "termination_round": self.termination_round,
                "early_terminated": self.early_terminated,
                "improvement_flags": list(self.improvement_flags), "policy": self.policy,
                "uniform_weighting": self.uniform_weighting,
                "rounds": [r.to_dict() for r in self.rounds]}


def _round(target: np.ndarray, k, prev, policy, config, max_steps) -> RoundState:
    # the round's reference action is its own greedy action, so settle it by
    # following transitions from the previous round's greedy action
    tp = JointPayoff(target, label=f"round{k}")
    trace = iterate_transitions(IDEAL_QMIX, tp, prev, policy, config, max_steps)
    last = trace.steps[-1]
    fit = next((f for f in last.fits if last.chosen_next in f.greedy_set), last.fits[0])
    return RoundState(k, prev, target, fit, last.chosen_next, trace.path, trace.terminated)


def mrvf_plan(q_hat: JointPayoff, rounds: int = 3, config: FitConfig = FitConfig(),
              policy: Optional[JointPolicy] = None, start=None,
              max_settle_steps: int = 50) -> MultiRoundResult:
    """Run the multi-round forward computation on an exact q_hat.

    ``policy`` is uniform (analytic planning) or centralized epsilon-greedy,
    whose reference is bound to each round's greedy action.  ``start`` is the
    default action before round 1 (all zeros), valued at minus infinity.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    policy = policy or uniform()
    counts = q_hat.action_counts
    prev = check_action(counts, start if start is not None else (0,) * q_hat.n_agents)
    prev_value = -math.inf
    states, flags = [], []
    output, term, early = prev, rounds, False
    for k in range(1, rounds + 1):
        target = q_hat.values.copy() if k == 1 else clipped_target(q_hat, prev)
        st = _round(target, k, prev, policy, config, max_settle_steps)
        states.append(st)
        value = q_hat[st.greedy]
        improved = value > prev_value
        flags.append(bool(improved))
        if not improved:
            output, term, early = prev, k, True
            break
        output = st.greedy
        prev, prev_value = st.greedy, value
    return MultiRoundResult(states, term, output, flags, early, policy.to_dict(),
                            policy.kind == UNIFORM)


def mrvf_single_round_ablation(q_hat: JointPayoff, config: FitConfig = FitConfig(),
                               policy: Optional[JointPolicy] = None, start=None) -> tuple:
    return mrvf_plan(q_hat, 1, config, policy, start).output


def strict_improvement_check(result: MultiRoundResult, q_hat: JointPayoff):
    """(ok, first violating round or None): every round after a non-optimal
    round must strictly improve q_hat."""
    best = set(argmax_set(q_hat))
    seq = result.greedy_sequence
    for k in range(1, len(seq)):
        if seq[k - 1] not in best and not q_hat[seq[k]] > q_hat[seq[k - 1]]:
            return False, k + 1
    return True, None


def round_bound_check(result: MultiRoundResult, q_hat: JointPayoff) -> bool:
    """An optimal action appears within n_joint + 1 rounds of a strictly improving trace."""
    ok, k = strict_improvement_check(result, q_hat)
    if not ok:
        raise ContractError(f"trace violates strict improvement at round {k}")
    best = set(argmax_set(q_hat))
    return any(u in best for u in result.greedy_sequence[:q_hat.n_joint + 1])


theorem_5_1_bound_check = round_bound_check  # published interface name


# ---------------------------------------------------------------- training


@dataclass
class QhatTable:
    """Tabular joint action values, one row per state id (one row for matrix games)."""
    values: np.ndarray
    visit_counts: np.ndarray

    @classmethod
    def zeros(cls, shape, n_states: int = 1) -> "QhatTable":
        return cls(np.zeros((n_states,) + tuple(shape)), np.zeros((n_states,) + tuple(shape), dtype=np.int64))

    def row(self, state: int = 0) -> JointPayoff:
        return JointPayoff(self.values[state])


def td_update_qjt(table: QhatTable, state: int, action, reward: float, next_state: Optional[int],
                  next_action=None, gamma: float = 0.99, lr: float = 0.1) -> QhatTable:
    """One tabular TD step; ``next_state=None`` marks a terminal transition."""
    idx = (int(state),) + tuple(int(a) for a in action)
    target = float(reward)
    if next_state is not None:
        if next_action is None:
            raise ValueError("non-terminal transitions need the next greedy action")
        target += gamma * table.values[(int(next_state),) + tuple(int(a) for a in next_action)]
    table.values[idx] += lr * (target - table.values[idx])
    table.visit_counts[idx] += 1
    return table


@dataclass
class TrainConfig:
    rounds: int = 3
    p: float = 0.2
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_anneal_steps: int = 20000
    lr: float = 0.1
    gamma: float = 0.99
    total_steps: int = 50000
    refit_every: int = 500
    eval_every: int = 5000
    seed: int = 0
    max_states: int = 512

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        for name in ("p", "eps_start", "eps_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.total_steps < 1 or self.refit_every < 1 or self.eval_every < 1:
            raise ValueError("step counts must be positive")

    def epsilon(self, step: int) -> float:
        frac = min(1.0, step / max(1, self.eps_anneal_steps))
        return self.eps_start + frac * (self.eps_end - self.eps_start)


class RoundFactorizations:
    """Per-round tabular individual values Q_i^k, keyed by the previous
    round's greedy joint action (and the state for sequential tasks)."""

    def __init__(self, rounds: int, fit_config: FitConfig):
        self.rounds = rounds
        self.fit_config = fit_config
        self.tables = {}     # (state, k, prev) -> (per-agent values, greedy, reference)

    def greedy(self, table: QhatTable, state, k, prev, eps):
        key = (state, k, prev)
        if key not in self.tables:
            self.refit(table, state, k, prev, eps, prev)
        return self.tables[key][1]

    def refit(self, table: QhatTable, state, k, prev, eps, reference=None):
        from .fitters import ideal_qmix_minimizers
        row = table.row(state)
        target = row.values if k == 1 else clipped_target(row, prev)
        key = (state, k, prev)
        ref = reference if reference is not None else self.tables[key][2]
        # weights follow the round's data distribution around its current greedy action;
        # a small floor keeps every joint action in the fit when exploration is off
        fits = ideal_qmix_minimizers(JointPayoff(target), centralized(max(eps, 1e-6), ref), self.fit_config)
        union = action_set(u for f in fits for u in f.greedy_set)
        new = ref if ref in union else union[0]
        fit = next(f for f in fits if new in f.greedy_set)
        self.tables[key] = (fit.per_agent_q, new, new)

    def refit_all(self, table, eps):
        for (state, k, prev) in list(self.tables):
            self.refit(table, state, k, prev, eps)


def forward(table: QhatTable, facts: RoundFactorizations, state: int, eps: float, start=None):
    """Greedy actions per round with early termination on the learned q_hat.

    Returns (output, list of round greedy actions, index of the round giving the output)."""
    row = table.values[state]
    prev = start if start is not None else (0,) * (row.ndim)
    prev_value = -math.inf
    greedies, out, out_round = [], prev, 0
    for k in range(1, facts.rounds + 1):
        g = facts.greedy(table, state, k, prev, eps)
        greedies.append(g)
        if not row[g] > prev_value:
            break
        out, out_round = g, k
        prev, prev_value = g, row[g]
    return out, greedies, out_round


class MatrixGame:
    """Episode-length-one environment around a payoff."""

    def __init__(self, payoff: JointPayoff):
        self.payoff = payoff
        self.action_counts = payoff.action_counts

    def reset(self, seed=None) -> int:
        return 0

    def step(self, action):
        return None, float(self.payoff[tuple(action)]), True


@dataclass
class TrainResult:
    table: QhatTable
    factorizations: dict
    log: list
    eval_output: tuple
    eval_return: float
    eval_normalized: float

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.log[0].keys()) if self.log else ["step"])
            w.writeheader()
            w.writerows(self.log)

    def to_dict(self) -> dict:
        return {"eval_output": list(self.eval_output), "eval_return": self.eval_return,
                "eval_normalized": self.eval_normalized, "log": self.log,
                "q_hat": self.table.values.tolist()}


def _normalized(payoff, action):
    from .games import DegenerateNormalizationError, normalized_return
    try:
        return normalized_return(payoff, action)
    except DegenerateNormalizationError:
        return float("nan")


def mrvf_train_one_step(payoff: JointPayoff, config: TrainConfig = TrainConfig(),
                        fit_config: FitConfig = FitConfig()) -> TrainResult:
    """Train tabular MRVF on a one-step game.

    Each step runs the forward pass; with probability p a uniformly chosen
    round's greedy action is executed, otherwise centralized epsilon-greedy
    around the early-termination output.  The reward updates q_hat; every
    ``refit_every`` steps the per-round factorizations are refitted to the
    raw / clipped targets of the current q_hat, weighted around each round's
    greedy action with the current epsilon.
    """
    rng = np.random.default_rng(config.seed)
    env = MatrixGame(payoff)
    shape = payoff.action_counts
    table = QhatTable.zeros(shape)
    facts = RoundFactorizations(config.rounds, fit_config)
    log = []
    round_hits = np.zeros(config.rounds + 1, dtype=np.int64)
    for step in range(1, config.total_steps + 1):
        eps = config.epsilon(step)
        s = env.reset()
        out, greedies, out_round = forward(table, facts, s, eps)
        round_hits[out_round] += 1
        if rng.random() < config.p:
            action = greedies[int(rng.integers(len(greedies)))]
        elif rng.random() < eps:
            action = tuple(int(rng.integers(n)) for n in shape)
        else:
            action = out
        _, r, done = env.step(action)
        td_update_qjt(table, s, action, r, None, gamma=config.gamma, lr=config.lr)
        if step % config.refit_every == 0:
            facts.refit_all(table, eps)
        if step % config.eval_every == 0 or step == config.total_steps:
            ev, _, ev_round = forward(table, facts, 0, eps)
            row = {"step": step, "epsilon": round(eps, 6), "eval_action": " ".join(map(str, ev)),
                   "eval_return": payoff[ev], "eval_normalized": _normalized(payoff, ev)}
            tot = max(1, int(round_hits.sum()))
            for k in range(1, config.rounds + 1):
                row[f"final_from_round{k}"] = round(round_hits[k] / tot, 6)
            log.append(row)
            round_hits[:] = 0
    ev, _, _ = forward(table, facts, 0, config.eps_end)
    return TrainResult(table, dict(facts.tables), log, ev, payoff[ev], _normalized(payoff, ev))


def train_config_dict(config: TrainConfig) -> dict:
    return asdict(config)

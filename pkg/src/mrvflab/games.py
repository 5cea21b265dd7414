"""Benchmark games: risk-reward payoffs, the one-step predator-prey matrix,
and a small grid predator-prey environment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fitters import FitConfig, ideal_qmix_minimizers
from .payoff import JointPayoff, check_action, pp_matrix
from .policy import CEN_EPS, DEC_EPS, JointPolicy


class DegenerateNormalizationError(ValueError):
    pass


@dataclass
class RiskRewardGame:
    n_agents: int
    n_actions: int
    reward_vectors: np.ndarray      # (n_agents, n_actions), indexed by mapped action
    bijections: np.ndarray          # (n_agents, n_actions), u_i -> v_i
    payoff: JointPayoff
    seed: int

    def to_dict(self) -> dict:
        return {"family": "riskreward", "n_agents": self.n_agents, "n_actions": self.n_actions,
                "seed": self.seed, "reward_vectors": self.reward_vectors.tolist(),
                "bijections": self.bijections.tolist(), "payoff": self.payoff.to_dict()}


def risk_reward_payoff(reward_vectors, bijections) -> np.ndarray:
    r = np.asarray(reward_vectors, dtype=float)
    sig = np.asarray(bijections, dtype=np.int64)
    n, m = r.shape
    idx = np.indices((m,) * n)
    v = np.stack([sig[i][idx[i]] for i in range(n)])
    total = sum(r[i][v[i]] for i in range(n))
    consensus = np.all(v == v[0], axis=0)
    return np.where(consensus, total, -total)


def gen_risk_reward(n_agents: int, n_actions: int, seed: int = 0) -> RiskRewardGame:
    """Random rewards r_i in [0, 10/n], random per-agent relabelings; only
    joint actions whose relabeled components agree pay positively."""
    if n_agents < 1 or n_actions < 1:
        raise ValueError("need at least one agent and one action")
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, 1.0, (n_agents, n_actions)) / n_agents * 10.0
    sig = np.stack([rng.permutation(n_actions) for _ in range(n_agents)])
    values = risk_reward_payoff(r, sig)
    return RiskRewardGame(n_agents, n_actions, r, sig,
                          JointPayoff(values, label=f"riskreward_n{n_agents}_u{n_actions}_s{seed}"), seed)


def normalized_return(payoff: JointPayoff, action) -> float:
    """Nonnegative payoffs map linearly onto [0, 1] between the smallest and
    largest nonnegative entry; negative payoffs map onto [-1, 0) as
    Q / |most negative entry|."""
    action = check_action(payoff.action_counts, action)
    v = payoff.values
    pos, neg = v[v >= 0], v[v < 0]
    if pos.size == 0 or neg.size == 0:
        raise DegenerateNormalizationError("payoff needs both nonnegative and negative entries")
    q = float(v[action])
    if q >= 0:
        lo, hi = float(pos.min()), float(pos.max())
        if hi == lo:
            raise DegenerateNormalizationError("nonnegative entries span an empty range")
        return (q - lo) / (hi - lo)
    return q / abs(float(neg.min()))


def one_step_pp_matrix(punishment: float) -> JointPayoff:
    """6x6 predator-prey payoff: 10 for a joint capture, the punishment for a lone one."""
    if punishment > 0:
        raise ValueError("punishment must be nonpositive")
    return pp_matrix(punishment)


def pp_limit_matrix(punishment: float, n: int = 6) -> np.ndarray:
    """Small-epsilon limit of the monotone fit around a non-capture pair."""
    m = np.zeros((n, n))
    m[0, :] = punishment
    m[:, 0] = punishment
    return m


@dataclass
class PPLimitCheck:
    epsilons: list
    gaps: list
    value_at_reference: list
    greedy_sets: list

    def to_dict(self) -> dict:
        return {"epsilons": list(self.epsilons), "gaps": list(self.gaps),
                "value_at_reference": list(self.value_at_reference),
                "greedy_sets": [[list(u) for u in g] for g in self.greedy_sets]}


def pp_limit_fit_check(punishment: float, tilde_u, epsilons, config: FitConfig = FitConfig(),
                       kind: str = DEC_EPS) -> PPLimitCheck:
    """Max-entry gap between the epsilon-greedy monotone fit around tilde_u
    and the limit matrix, per epsilon (worst minimizer).

    The limit holds for per-agent (decentralized) exploration, where actions
    one deviation away from tilde_u carry O(eps) weight and the joint
    capture O(eps^2); pass kind=CEN_EPS for the joint-action variant.
    """
    if kind not in (DEC_EPS, CEN_EPS):
        raise ValueError("kind must be an epsilon-greedy policy kind")
    payoff = one_step_pp_matrix(punishment)
    tilde_u = check_action(payoff.action_counts, tilde_u)
    target = pp_limit_matrix(punishment)
    gaps, vals, greedy = [], [], []
    for eps in epsilons:
        if eps <= 0:
            raise ValueError("epsilons must be strictly positive")
        fits = ideal_qmix_minimizers(payoff, JointPolicy(kind, eps, tilde_u), config)
        gaps.append(max(float(np.max(np.abs(f.q_tot - target))) for f in fits))
        vals.append(float(fits[0].q_tot[tilde_u]))
        greedy.append(fits[0].greedy_set)
    return PPLimitCheck(list(epsilons), gaps, vals, greedy)


# ------------------------------------------------------------ environment

UP, DOWN, LEFT, RIGHT, STAY, CAPTURE = range(6)
ACTION_NAMES = ("up", "down", "left", "right", "stay", "capture")
_MOVES = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0)}


@dataclass(frozen=True)
class EnvState:
    id: tuple
    observations: np.ndarray


@dataclass
class PredatorPreyEnv:
    width: int = 3
    height: int = 3
    n_predators: int = 2
    n_prey: int = 1
    punishment: float = -2.0
    episode_limit: int = 20
    prey_moves: bool = False
    predators: np.ndarray = field(default=None, repr=False)
    prey: np.ndarray = field(default=None, repr=False)
    predator_alive: np.ndarray = field(default=None, repr=False)
    prey_alive: np.ndarray = field(default=None, repr=False)
    t: int = 0
    rng: Optional[np.random.Generator] = field(default=None, repr=False)

    def __post_init__(self):
        if self.punishment > 0:
            raise ValueError("punishment must be nonpositive")
        if min(self.width, self.height, self.n_predators, self.n_prey, self.episode_limit) < 1:
            raise ValueError("grid size, agent counts and episode limit must be positive")

    @property
    def action_counts(self) -> tuple:
        return (len(ACTION_NAMES),) * self.n_predators

    @property
    def prey_removed(self) -> int:
        return int(np.sum(~self.prey_alive))

    def state(self) -> EnvState:
        sid = (tuple(map(tuple, self.predators.tolist())), tuple(map(tuple, self.prey.tolist())),
               tuple(self.predator_alive.tolist()), tuple(self.prey_alive.tolist()), self.t)
        return EnvState(sid, self.observations())

    def observations(self) -> np.ndarray:
        """Own position, then offset and alive flag of every prey; zeros once removed."""
        scale = np.array([max(1, self.width - 1), max(1, self.height - 1)], dtype=float)
        obs = np.zeros((self.n_predators, 2 + 3 * self.n_prey))
        for i in range(self.n_predators):
            if not self.predator_alive[i]:
                continue
            obs[i, :2] = self.predators[i] / scale
            for j in range(self.n_prey):
                if self.prey_alive[j]:
                    obs[i, 2 + 3 * j:4 + 3 * j] = (self.prey[j] - self.predators[i]) / scale
                    obs[i, 4 + 3 * j] = 1.0
        return obs


def env_reset(env: PredatorPreyEnv, seed: Optional[int] = None) -> EnvState:
    env.rng = np.random.default_rng(seed)
    cells = env.width * env.height
    env.predators = np.array([divmod(int(c), env.height) for c in env.rng.integers(cells, size=env.n_predators)])
    env.prey = np.array([divmod(int(c), env.height) for c in env.rng.integers(cells, size=env.n_prey)])
    env.predator_alive = np.ones(env.n_predators, dtype=bool)
    env.prey_alive = np.ones(env.n_prey, dtype=bool)
    env.t = 0
    return env.state()


def _clamp(env, pos, move):
    return np.array([min(max(pos[0] + move[0], 0), env.width - 1),
                     min(max(pos[1] + move[1], 0), env.height - 1)])


def env_step(env: PredatorPreyEnv, action):
    """Move, then adjudicate captures prey by prey.  Returns (state, reward, done)."""
    if env.predators is None:
        raise RuntimeError("call env_reset first")
    action = tuple(int(a) for a in action)
    if len(action) != env.n_predators or any(not 0 <= a < len(ACTION_NAMES) for a in action):
        raise ValueError(f"joint action {action} out of range")
    for i, a in enumerate(action):
        if env.predator_alive[i] and a in _MOVES:
            env.predators[i] = _clamp(env, env.predators[i], _MOVES[a])
    reward = 0.0
    used = np.zeros(env.n_predators, dtype=bool)
    for j in range(env.n_prey):
        if not env.prey_alive[j]:
            continue
        capturers = [i for i in range(env.n_predators)
                     if env.predator_alive[i] and not used[i] and action[i] == CAPTURE
                     and np.array_equal(env.predators[i], env.prey[j])]
        if len(capturers) >= 2:
            reward += 10.0
            env.prey_alive[j] = False
            for i in capturers:
                env.predator_alive[i] = False
                used[i] = True
        elif len(capturers) == 1:
            reward += env.punishment
            used[capturers[0]] = True
    if env.prey_moves:
        for j in range(env.n_prey):
            if env.prey_alive[j]:
                a = int(env.rng.integers(5))
                if a in _MOVES:
                    env.prey[j] = _clamp(env, env.prey[j], _MOVES[a])
    env.t += 1
    done = bool(not env.prey_alive.any() or env.t >= env.episode_limit)
    return env.state(), reward, done


def env_rollouts(env: PredatorPreyEnv, episodes: int, seed: int = 0) -> list:
    """Uniform-random-action episodes; one log row (episode, step, state id,
    actions, reward, done) per transition.  Episode e resets with seed + e."""
    rng = np.random.default_rng(seed)
    rows = []
    for e in range(episodes):
        state = env_reset(env, seed + e)
        done = False
        while not done:
            action = tuple(int(a) for a in rng.integers(len(ACTION_NAMES), size=env.n_predators))
            nxt, reward, done = env_step(env, action)
            rows.append({"episode": e, "step": env.t, "state": repr(state.id),
                         "actions": " ".join(ACTION_NAMES[a] for a in action),
                         "reward": reward, "done": done})
            state = nxt
    return rows

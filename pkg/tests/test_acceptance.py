"""Acceptance suite.  Each criterion prints one PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) for the report alone.
"""
import hashlib
import sys
import time

import numpy as np
import pytest

from mrvflab.fitters import (IDEAL_QMIX, QPLEX, RESQ, WQMIX, FitConfig, fit_ideal_qmix,
                             fit_ideal_qmix_constrained, resq_leaving_fit)
from mrvflab.games import (CAPTURE, PredatorPreyEnv, env_reset, env_step, gen_risk_reward,
                           one_step_pp_matrix, pp_limit_fit_check)
from mrvflab.mrvf import (ContractError, TrainConfig, mrvf_plan, mrvf_train_one_step,
                          strict_improvement_check, round_bound_check)
from mrvflab.payoff import JointPayoff, argmax_set, argmin_set, all_actions, corpus_payoff
from mrvflab.policy import centralized, decentralized, uniform
from mrvflab.reproduce import check_table2, check_table5, check_table6, check_table7, check_table8
from mrvflab.stability import (STABLE_CANDIDATE, UNSTABLE, WEAK, classify_stable_point,
                               enumerate_stable_points, iterate_transitions,
                               reference_gap_check, stable_points)


def _random_3x3(seed):
    return JointPayoff(np.random.default_rng(seed).normal(size=(3, 3)), label=f"normal3x3_s{seed}")


def _checks(checks):
    return all(c.passed for c in checks), "; ".join(c.line() for c in checks)


def criterion_1():
    ok, detail = _checks(check_table6())
    return ok, detail


def criterion_2():
    return _checks(check_table2())


def criterion_3():
    p = corpus_payoff("table6_qjt")
    tr = iterate_transitions(WQMIX, p, (0, 2), uniform(), FitConfig(alpha=0.1), max_steps=5, q_hat=p)
    first = tr.steps[0].chosen_next if tr.steps else None
    ok = first == (2, 2) and tr.terminated and tr.final == (0, 0)
    return ok, f"path {tr.path}, terminated {tr.terminated}"


def criterion_4():
    p = corpus_payoff("table6_qjt")
    r = mrvf_plan(p, 3)
    ok = (np.array_equal(r.rounds[0].target, p.values)
          and r.rounds[0].greedy == (2, 2)
          and np.array_equal(r.rounds[1].target, [[3, 0, 0], [0, 0, 0], [0, 0, 0]])
          and r.rounds[1].greedy == (0, 0)
          and r.improvement_flags[2] is False and r.output == (0, 0))
    return ok, f"greedy {r.greedy_sequence}, flags {r.improvement_flags}, output {r.output}"


def criterion_5():
    cols_ok, cols = _checks(check_table7() + check_table8())
    p = corpus_payoff("table8_qjt")
    flagged = stable_points(enumerate_stable_points(QPLEX, p, config=FitConfig(tolerance=1e-4)))
    bolded = [(0, 0), (1, 1), (2, 2)]
    best = argmax_set(p)
    enum_ok = sorted(flagged) == bolded and sum(u not in best for u in flagged) == 2
    return cols_ok and enum_ok, f"columns converge: {cols_ok}; table8_qjt candidates {flagged}"


def criterion_6():
    table_ok, _ = _checks(check_table5())
    bad = []
    for seed in range(20):
        p = _random_3x3(seed)
        (top,) = argmax_set(p)
        for u in all_actions(p.action_counts):
            cls = classify_stable_point(RESQ, p, u).classification
            leave = resq_leaving_fit(p, u)
            if cls != (WEAK if u == top else UNSTABLE) or leave is None or leave.loss > 1e-12:
                bad.append((seed, u, cls))
    return table_ok and not bad, f"construction {table_ok}, violations {bad[:5]}"


def criterion_7():
    bad = []
    for seed in range(20):
        p = _random_3x3(seed)
        for u in argmin_set(p):
            if classify_stable_point(IDEAL_QMIX, p, u, centralized(0.01)).classification != UNSTABLE:
                bad.append((seed, u))
    return not bad, f"non-unstable argmin actions: {bad}"


def criterion_8():
    strict, flat, worst, bad = 0, 0, 0.0, []
    for seed in range(10):
        p = _random_3x3(seed)
        for u in all_actions(p.action_counts):
            g = reference_gap_check(p, u, [0.5, 0.1, 0.01])
            worst = max(worst, g[-1])
            if g[0] > g[1] > g[2]:
                strict += 1
            else:
                bad.append((seed, u, [round(x, 4) for x in g]))
    ok = not bad and worst <= 0.05
    return ok, (f"strictly decreasing {strict}/90, worst gap at 0.01 {worst:.4f}, "
                f"not strictly decreasing {len(bad)} (e.g. {bad[:2]})")


def criterion_9():
    counts_bad, miss, contract = 0, [], []
    for m in (3, 4, 5):
        for seed in range(100):
            g = gen_risk_reward(2, m, seed)
            v = g.payoff.values
            if int(np.sum(v > 0)) != m or np.abs(v).max() > 10:
                counts_bad += 1
            r = mrvf_plan(g.payoff, m)
            if r.output not in argmax_set(g.payoff):
                miss.append((m, seed))
            try:
                ok, _ = strict_improvement_check(r, g.payoff)
                if not ok:
                    contract.append((m, seed))
                round_bound_check(r, g.payoff)
            except ContractError:
                contract.append((m, seed))
    ok = counts_bad == 0 and not miss and not contract
    return ok, f"bad counts {counts_bad}, argmax misses {miss}, contract violations {contract}"


def criterion_10():
    full, single = [], []
    for seed in range(10):
        p = gen_risk_reward(2, 3, seed).payoff
        full.append(mrvf_train_one_step(p, TrainConfig(rounds=3, p=0.2, seed=seed, total_steps=50_000)).eval_normalized)
        single.append(mrvf_train_one_step(p, TrainConfig(rounds=1, p=0.2, seed=seed, total_steps=50_000)).eval_normalized)
    hits = sum(x == 1.0 for x in full)
    hits1 = sum(x == 1.0 for x in single)
    med = float(np.median(full))
    ok = med >= 0.95 and hits >= 8 and hits1 < hits
    return ok, f"median {med:.3f}, optimal {hits}/10, single-round optimal {hits1}/10"


def criterion_11():
    c = pp_limit_fit_check(-2, (3, 3), [0.3, 0.1, 0.01])
    decreasing = all(a > b for a, b in zip(c.gaps, c.gaps[1:])) and c.gaps[-1] <= 0.1
    p = one_step_pp_matrix(-2)
    stable = classify_stable_point(IDEAL_QMIX, p, (3, 3), decentralized(0.01)).is_stable
    r = mrvf_plan(p, 2, policy=centralized(0.01), start=(3, 3))
    ok = decreasing and stable and r.output == (0, 0) and p[r.output] == 10
    return ok, (f"gaps {[round(x, 4) for x in c.gaps]}, (3,3) stable {stable}, "
                f"plan output {r.output} in {r.termination_round} rounds")


def _episodes(n=1000):
    digest = hashlib.sha256()
    problems = []
    for seed in range(n):
        env = PredatorPreyEnv()
        env_reset(env, seed)
        rng = np.random.default_rng(10_000 + seed)
        done = False
        while not done:
            before_alive = env.predator_alive.copy()
            before_pos = env.predators.copy()
            prey_before = env.prey_alive.copy()
            action = tuple(int(a) for a in rng.integers(6, size=env.n_predators))
            state, reward, done = env_step(env, action)
            # capturers are alive predators that chose capture and stand on live prey after moving
            on_prey = [i for i in range(env.n_predators) if before_alive[i] and action[i] == CAPTURE
                       and any(np.array_equal(env.predators[i], env.prey[j])
                               for j in range(env.n_prey) if prey_before[j])]
            newly = int(np.sum(prey_before & ~env.prey_alive))
            lone = 1 if len(on_prey) == 1 else 0
            if reward != 10.0 * newly + env.punishment * lone:
                problems.append((seed, env.t, "reward"))
            gone = before_alive & ~env.predator_alive
            if newly and int(gone.sum()) < 2 or not newly and gone.any():
                problems.append((seed, env.t, "removal"))
            if (env.predator_alive & ~before_alive).any() or (env.prey_alive & ~prey_before).any():
                problems.append((seed, env.t, "revival"))
            if not np.array_equal(env.predators[~before_alive], before_pos[~before_alive]):
                problems.append((seed, env.t, "removed predator moved"))
            obs = state.observations
            if np.any(obs[~env.predator_alive] != 0):
                problems.append((seed, env.t, "observation mask"))
            for j in range(env.n_prey):
                if not env.prey_alive[j] and np.any(obs[:, 2 + 3 * j:5 + 3 * j] != 0):
                    problems.append((seed, env.t, "prey mask"))
            if done != (not env.prey_alive.any() or env.t >= env.episode_limit):
                problems.append((seed, env.t, "termination"))
            digest.update(repr((action, reward, done, state.id)).encode())
            digest.update(obs.tobytes())
    return digest.hexdigest(), problems


def criterion_12():
    h1, problems = _episodes()
    h2, _ = _episodes()
    ok = not problems and h1 == h2
    return ok, f"invariant violations {len(problems)} {problems[:3]}, identical reruns {h1 == h2}"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_criterion(i):
    t = time.perf_counter()
    ok, detail = CRITERIA[i]()
    line = f"{'PASS' if ok else 'FAIL'} criterion {i}: {detail} ({time.perf_counter() - t:.1f} s)"
    return ok, line


@pytest.mark.parametrize("i", sorted(CRITERIA))
def test_criterion(i, capsys):
    ok, line = run_criterion(i)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(i) for i in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)

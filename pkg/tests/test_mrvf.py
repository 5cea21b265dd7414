import math

import numpy as np
import pytest

from mrvflab.mrvf import (ContractError, MultiRoundResult, QhatTable, RoundState, TrainConfig,
                          clipped_target, mrvf_plan, mrvf_single_round_ablation,
                          mrvf_train_one_step, strict_improvement_check, td_update_qjt,
                          round_bound_check)
from mrvflab.payoff import JointPayoff, argmax_set, corpus_payoff
from mrvflab.policy import centralized


def test_clipped_target_examples():
    p = corpus_payoff("table6_qjt")
    np.testing.assert_array_equal(clipped_target(p, (2, 2)), [[3, 0, 0], [0, 0, 0], [0, 0, 0]])
    assert np.all(clipped_target(p, (0, 0)) == 0)
    assert np.all(clipped_target(JointPayoff(np.full((2, 2), 3.0)), (1, 0)) == 0)


def test_plan_three_round_sequence():
    p = corpus_payoff("table6_qjt")
    r = mrvf_plan(p, 3)
    np.testing.assert_array_equal(r.rounds[0].target, p.values)
    assert r.greedy_sequence[:2] == [(2, 2), (0, 0)]
    assert r.improvement_flags == [True, True, False]
    assert r.output == (0, 0) and r.termination_round == 3 and r.early_terminated
    assert r.uniform_weighting
    ok, k = strict_improvement_check(r, p)
    assert ok and k is None
    assert round_bound_check(r, p)


def test_plan_terminates_after_optimal_first_round():
    p = corpus_payoff("table10a_monotonic")
    r = mrvf_plan(p, 3)
    assert r.output == (0, 0) and r.termination_round == 2
    assert r.rounds[1].target.max() == 0


def test_single_round_equals_plan_with_one_round():
    p = corpus_payoff("table6_qjt")
    assert mrvf_single_round_ablation(p) == mrvf_plan(p, 1).output == (2, 2)


def test_running_maximum_and_affine_invariance():
    rng = np.random.default_rng(5)
    for _ in range(5):
        p = JointPayoff(np.round(rng.normal(size=(3, 3)) * 3, 2))
        r = mrvf_plan(p, 4)
        assert p[r.output] == max(p[g] for g, f in zip(r.greedy_sequence, r.improvement_flags) if f)
        assert mrvf_plan(p.scaled(2.5, -7.0), 4).output == r.output


def test_plan_from_custom_start_with_centralized_policy():
    p = corpus_payoff("pp_onestep_p2")
    r = mrvf_plan(p, 2, policy=centralized(0.01), start=(3, 3))
    assert r.output == (0, 0) and r.rounds[0].prev_greedy == (3, 3)
    assert r.rounds[0].fit.auxiliary is not None


def test_strict_improvement_violation_found():
    p = corpus_payoff("table6_qjt")
    r = mrvf_plan(p, 2)
    fake = MultiRoundResult([r.rounds[0], r.rounds[0]], 2, (2, 2), [True, True], False, {}, True)
    ok, k = strict_improvement_check(fake, p)
    assert not ok and k == 2
    with pytest.raises(ContractError):
        round_bound_check(fake, p)


def test_td_terminal_update():
    t = QhatTable.zeros((2, 2))
    td_update_qjt(t, 0, (1, 0), 1.0, None, lr=1.0)
    assert t.values[0, 1, 0] == 1.0 and t.visit_counts[0, 1, 0] == 1


def test_td_two_step_chain_fixed_point():
    t = QhatTable.zeros((1,), n_states=2)
    for _ in range(200):
        td_update_qjt(t, 1, (0,), 2.0, None, lr=0.5)
        td_update_qjt(t, 0, (0,), 1.0, 1, (0,), gamma=0.9, lr=0.5)
    assert t.values[0, 0] == pytest.approx(1.0 + 0.9 * 2.0)
    with pytest.raises(ValueError):
        td_update_qjt(t, 0, (0,), 1.0, 1)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(p=1.5)
    with pytest.raises(ValueError):
        TrainConfig(rounds=0)
    assert TrainConfig(eps_start=1.0, eps_end=0.0, eps_anneal_steps=10).epsilon(5) == pytest.approx(0.5)


def test_training_finds_optimum_and_is_deterministic():
    p = corpus_payoff("table6_qjt")
    cfg = TrainConfig(total_steps=6000, refit_every=200, eval_every=2000, seed=1)
    a = mrvf_train_one_step(p, cfg)
    b = mrvf_train_one_step(p, cfg)
    assert a.eval_output == (0, 0) and a.eval_return == 8.0
    assert a.log == b.log
    assert {"step", "eval_return", "final_from_round1"} <= set(a.log[-1])


def test_training_sampling_branch_executes_round_greedy(monkeypatch):
    from mrvflab import mrvf
    executed = []
    real = mrvf.td_update_qjt

    def spy(table, state, action, *a, **k):
        executed.append(tuple(action))
        return real(table, state, action, *a, **k)

    monkeypatch.setattr(mrvf, "td_update_qjt", spy)
    seen = []
    real_forward = mrvf.forward

    def fwd(*a, **k):
        out = real_forward(*a, **k)
        seen.append(out[1])
        return out

    monkeypatch.setattr(mrvf, "forward", fwd)
    p = corpus_payoff("table6_qjt")
    mrvf_train_one_step(p, TrainConfig(total_steps=300, p=1.0, eps_start=0.0, eps_end=0.0,
                                       refit_every=50, eval_every=300))
    train_greedies = seen[:len(executed)]
    for act, g in zip(executed, train_greedies):
        assert act in g


def test_training_log_csv(tmp_path):
    p = corpus_payoff("table8_qjt")
    r = mrvf_train_one_step(p, TrainConfig(total_steps=1000, refit_every=100, eval_every=500))
    path = tmp_path / "log.csv"
    r.write_log(path)
    assert path.read_text().splitlines()[0].startswith("step,")

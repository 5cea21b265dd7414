import numpy as np
import pytest

from mrvflab.fitters import (ConvergenceError, FitConfig, fit_qplex, fit_resq, qplex_gradients,
                             qplex_qtot, qplex_stationarity_check, resq_leaving_fit,
                             resq_staying_fit, resq_zero_loss_fits)
from mrvflab.payoff import JointPayoff, all_actions, corpus_payoff
from mrvflab.policy import centralized, uniform
from mrvflab.reproduce import QPLEX_TABLE7, QPLEX_TABLE8
from oracles import is_monotone


def test_resq_leave_to_construction():
    p = corpus_payoff("table5_qjt")
    f = resq_leaving_fit(p, (0, 0), leave_to=(1, 2))
    aux = f.auxiliary
    np.testing.assert_array_equal(aux["q_mon"], [[8, 8, 8], [8, 8, 9], [8, 8, 8]])
    np.testing.assert_array_equal(aux["q_r"], [[0, -20, -20], [-20, -5, -9], [-20, -8, -3]])
    np.testing.assert_array_equal(aux["q_mon"] + aux["w_r"] * aux["q_r"], p.values)
    assert f.loss == 0.0 and f.greedy_set == ((1, 2),)


def test_resq_residual_nonpositive_and_monotone(rng):
    for _ in range(10):
        p = JointPayoff(rng.normal(size=(3, 3)))
        for u in all_actions((3, 3)):
            for f in resq_zero_loss_fits(p, u, centralized(0.1)):
                assert np.all(f.auxiliary["q_r"] <= 0)
                assert is_monotone(f.auxiliary["q_mon"])
                assert f.loss == pytest.approx(0.0, abs=1e-12)


def test_resq_staying_only_at_maximum():
    p = corpus_payoff("table6_qjt")
    assert resq_staying_fit(p, (0, 0)).greedy_set == ((0, 0),)
    assert resq_staying_fit(p, (2, 2)) is None


def test_resq_leaving_to_a_shared_component_rejected():
    with pytest.raises(ValueError):
        resq_leaving_fit(corpus_payoff("table6_qjt"), (2, 2), leave_to=(2, 0))


def test_fit_resq_attaches_alternative():
    f = fit_resq(corpus_payoff("table6_qjt"), (0, 0))
    assert f.auxiliary["role"] == "stay"
    assert f.auxiliary["alternative"].auxiliary["role"] == "leave"


def test_qplex_qtot_identity_at_greedy():
    qs = [np.array([1.0, 3.0]), np.array([2.0, 0.5, 0.0])]
    ws = [np.full((2, 3), 2.0), np.full((2, 3), 0.5)]
    q = qplex_qtot(qs, ws)
    assert q[1, 0] == pytest.approx(5.0)
    assert q[0, 0] == pytest.approx(5.0 + 2.0 * (1.0 - 3.0))


def test_qplex_gradients_match_finite_differences(rng):
    p = corpus_payoff("table7_qjt")
    qs = [rng.normal(size=3), rng.normal(size=3)]
    ws = [rng.uniform(0.5, 1.5, (3, 3)) for _ in range(2)]
    gq, gw, _ = qplex_gradients(p, qs, ws)

    def loss(qs, ws):
        return float(np.sum((qplex_qtot(qs, ws) - p.values) ** 2))

    h = 1e-6
    for i in range(2):
        for a in range(3):
            if a == int(np.argmax(qs[i])):
                continue  # the max term is held fixed
            d = [q.copy() for q in qs]
            d[i][a] += h
            fd = (loss(d, ws) - loss(qs, ws)) / h
            assert fd == pytest.approx(2 * gq[i][a], rel=1e-4, abs=1e-4)
        for idx in [(0, 1), (2, 2)]:
            d = [w.copy() for w in ws]
            d[i][idx] += h
            fd = (loss(qs, d) - loss(qs, ws)) / h
            assert fd == pytest.approx(2 * gw[i][idx], rel=1e-4, abs=1e-4)


@pytest.mark.parametrize("key,rows", [("table7_qjt", QPLEX_TABLE7), ("table8_qjt", QPLEX_TABLE8)])
def test_qplex_descent_from_printed_values(key, rows):
    p = corpus_payoff(key)
    for u, qs, ws in rows:
        f = fit_qplex(p, init=(qs, ws), config=FitConfig(tolerance=1e-4))
        assert f.greedy_set == (u,)
        st = qplex_stationarity_check(p, f.per_agent_q, f.auxiliary["weights"], tol=1e-4)
        assert st.stationary and all(np.all(w >= 0) for w in f.auxiliary["weights"])


def test_qplex_printed_values_are_rounded_not_stationary():
    p = corpus_payoff("table7_qjt")
    u, qs, ws = QPLEX_TABLE7[0]
    st = qplex_stationarity_check(p, qs, ws, tol=0.15)
    assert not st.stationary and st.residual == pytest.approx(0.2114, abs=1e-3)


def test_qplex_random_start_converges():
    p = corpus_payoff("table8_qjt")
    f = fit_qplex(p, config=FitConfig(tolerance=1e-4, seed=3))
    assert qplex_stationarity_check(p, f.per_agent_q, f.auxiliary["weights"], tol=1e-4).stationary


def test_qplex_iteration_limit():
    with pytest.raises(ConvergenceError):
        fit_qplex(corpus_payoff("table7_qjt"), config=FitConfig(tolerance=1e-12, max_iters=5))


def test_qplex_negative_weights_rejected():
    p = corpus_payoff("table8_qjt")
    with pytest.raises(ValueError):
        qplex_stationarity_check(p, [np.zeros(3)] * 2, [-np.ones((3, 3))] * 2)

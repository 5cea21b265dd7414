"""Embedded table expectations and the checks that compare fits against them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fitters import (FitConfig, ConvergenceError, fit_ideal_qmix, fit_ideal_qmix_constrained,
                      fit_qplex, fit_wqmix, qplex_stationarity_check, resq_leaving_fit)
from .mrvf import mrvf_plan
from .payoff import corpus_payoff
from .stability import UNSTABLE, classify_stable_point

A = np.array

# (bolded action, [Q_1, Q_2], [w_1, w_2]) as printed, two decimals
QPLEX_TABLE7 = [
    ((0, 0), [A([5.23, 0.49, 0.33]), A([2.77, 0.31, 0.37])],
     [A([[0.25, 1.51, 1.71], [4.21, 0.48, 0.10], [4.08, 0.59, 0.09]]),
      A([[2.01, 8.13, 8.34], [0.85, 1.12, 3.12], [4.62, 2.08, 1.05]])]),
    ((1, 1), [A([1.42, 2.41, 1.09]), A([1.82, 3.09, 0.70])],
     [A([[0, 17.64, 5.01], [8.53, 7.65, 1.41], [5.30, 4.16, 0.15]]),
      A([[0, 9.07, 5.22], [13.71, 7.94, 2.29], [8.23, 3.76, 0.13]])]),
    ((2, 2), [A([1.38, 0.68, 3.09]), A([1.29, 0.66, 3.41])],
     [A([[0, 6.70, 10.86], [3.35, 0.26, 2.71], [5.10, 1.03, 1.92]]),
      A([[0, 2.58, 2.50], [4.93, 1.05, 0.23], [8.72, 2.36, 1.47]])]),
]
QPLEX_TABLE8 = [
    ((0, 0), [A([3.86, 0.44, 0.54]), A([4.14, 1.85, 0.73])],
     [A([[0.94, 1.31, 1.10], [2.34, 0.83, 0.91], [2.41, 1.49, 0.83]]),
      A([[1.44, 3.50, 2.34], [0.76, 0.95, 1.43], [0.66, 1.34, 0.07]])]),
    ((1, 1), [A([2.59, 2.75, 1.11]), A([2.57, 2.75, 0.99])],
     [A([[0, 33.25, 1.48], [8.82, 13.44, 0.44], [3.00, 3.35, 0.16]]),
      A([[0, 19.52, 2.99], [31.74, 20.50, 3.13], [3.35, 1.73, 0.14]])]),
    ((2, 2), [A([3.06, 0.82, 3.35]), A([2.86, 0.57, 3.15])],
     [A([[0, 2.91, 22.31], [2.13, 0.54, 2.57], [4.35, 1.53, 14.12]]),
      A([[0, 2.20, 0.10], [3.89, 0.83, 1.94], [22.74, 2.53, 6.15]])]),
]

TABLE6_QTOT = A([[-8, -8, -8], [-8, 1, 1], [-8, 1, 5]], dtype=float)
TABLE6_QTOT_CONSTRAINED = A([[8, -5, -5], [-5, -5, -5], [-5, -5, -5]], dtype=float)
TABLE2_QTOT_CONSTRAINED = A([[4, 1, -4], [1, 1, -4], [-4, -4, -8]], dtype=float)
TABLE5_QMON = A([[8, 8, 8], [8, 8, 9], [8, 8, 8]], dtype=float)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _close(a, b, tol):
    return bool(np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), atol=tol, rtol=0))


def check_table6() -> list:
    p = corpus_payoff("table6_qjt")
    f = fit_ideal_qmix(p)
    c = fit_ideal_qmix_constrained(p, required_greedy=(0, 0))
    return [
        Check("table6 unconstrained", abs(f.mean_loss - 36.22) <= 0.05 and _close(f.q_tot, TABLE6_QTOT, 0.05),
              f"mean loss {f.mean_loss:.4f}, greedy {f.greedy_set}"),
        Check("table6 constrained (0,0)",
              abs(c.mean_loss - 45.56) <= 0.05 and _close(c.q_tot, TABLE6_QTOT_CONSTRAINED, 0.05),
              f"mean loss {c.mean_loss:.4f}"),
    ]


def check_table2() -> list:
    p = corpus_payoff("table2_qjt")
    cfg = FitConfig(alpha=0.1)
    con = fit_wqmix(p, p, (0, 0), 0.1, config=cfg, required_greedy=(0, 0))
    unc = fit_wqmix(p, p, (0, 0), 0.1, config=cfg)
    verdicts = {a: classify_stable_point("wqmix", p, (0, 0), config=FitConfig(alpha=a), q_hat=p).classification
                for a in (0.05, 0.1, 0.5, 0.9)}
    return [
        Check("table2 constrained (0,0)", abs(con.loss - 7.0) <= 0.05 and _close(con.q_tot, TABLE2_QTOT_CONSTRAINED, 0.05),
              f"loss {con.loss:.4f}"),
        Check("table2 unconstrained", abs(unc.loss - 3.3) <= 0.05 and (0, 0) not in unc.greedy_set,
              f"loss {unc.loss:.4f}, greedy {unc.greedy_set}"),
        Check("table2 (0,0) unstable", all(v == UNSTABLE for v in verdicts.values()), str(verdicts)),
    ]


def check_table4() -> list:
    p = corpus_payoff("table6_qjt")
    r = mrvf_plan(p, 3)
    seq = r.greedy_sequence
    ok = (len(r.rounds) == 3 and np.array_equal(r.rounds[0].target, p.values)
          and np.array_equal(r.rounds[1].target, corpus_payoff("table4_round2").values)
          and seq[:2] == [(2, 2), (0, 0)] and r.improvement_flags == [True, True, False]
          and r.output == (0, 0))
    return [Check("table4 plan", ok, f"greedy {seq}, flags {r.improvement_flags}, output {r.output}")]


def check_table5() -> list:
    p = corpus_payoff("table5_qjt")
    f = resq_leaving_fit(p, (0, 0), leave_to=(1, 2))
    aux = f.auxiliary
    ok = (np.array_equal(aux["q_mon"], TABLE5_QMON)
          and np.array_equal(aux["q_mon"] + aux["w_r"] * aux["q_r"], p.values)
          and f.loss == 0.0 and (0, 0) not in f.greedy_set)
    return [Check("table5 construction", ok, f"greedy {f.greedy_set}, loss {f.loss}")]


def _check_qplex(name, key, rows) -> list:
    p = corpus_payoff(key)
    out = []
    for u, qs, ws in rows:
        try:
            f = fit_qplex(p, init=(qs, ws), config=FitConfig(tolerance=1e-4))
            st = qplex_stationarity_check(p, f.per_agent_q, f.auxiliary["weights"], tol=1e-4)
            ok = st.stationary and f.greedy_set == (u,)
            detail = f"loss {f.loss:.4f}, greedy {f.greedy_set}, {f.iterations} steps"
        except ConvergenceError as e:
            ok, detail = False, str(e)
        out.append(Check(f"{name} column {u}", ok, detail))
    return out


def check_table7() -> list:
    return _check_qplex("table7", "table7_qjt", QPLEX_TABLE7)


def check_table8() -> list:
    return _check_qplex("table8", "table8_qjt", QPLEX_TABLE8)


TABLES = {"table2": check_table2, "table4": check_table4, "table5": check_table5,
          "table6": check_table6, "table7": check_table7, "table8": check_table8}


def run(table: str) -> list:
    if table == "all":
        return [c for fn in TABLES.values() for c in fn()]
    if table not in TABLES:
        raise KeyError(f"unknown table {table!r}; known: all, {', '.join(TABLES)}")
    return TABLES[table]()

"""The greedy-action dynamical system: transitions, traces and stable points.

A transition fixes the gradient-free reference action tilde_u, minimizes the
scheme's loss, and reads off the greedy action(s) of the minimizers.  A stable
point is an action that can map to itself; it is strong when every minimizer
keeps it greedy and weak when only some do.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fitters import (GRADIENT, IDEAL_QMIX, QPLEX, RESQ, VDN, WQMIX, CapabilityError,
                      ConvergenceError, FactorizedFit, FitConfig, fit_qplex, fit_vdn,
                      ideal_qmix_minimizers, qplex_stationarity_check, resq_leaving_fit,
                      resq_staying_fit, resq_zero_loss_fits, wqmix_minimizers)
from .payoff import JointPayoff, action_set, all_actions, check_action
from .policy import JointPolicy, centralized, uniform

STRONG = "Strong"
WEAK = "Weak"
UNSTABLE = "Unstable"
STABLE_CANDIDATE = "StableCandidate"
TRANSITION_SCHEMES = (IDEAL_QMIX, WQMIX, RESQ, QPLEX, VDN)


@dataclass
class StabilityReport:
    candidate: tuple
    classification: str
    min_loss: float
    witness_stay: Optional[FactorizedFit] = None
    witness_leave: Optional[FactorizedFit] = None
    scheme: str = ""
    n_minimizers: int = 0

    @property
    def is_stable(self) -> bool:
        return self.classification in (STRONG, WEAK, STABLE_CANDIDATE)

    def to_dict(self) -> dict:
        return {
            "candidate": list(self.candidate),
            "classification": self.classification,
            "min_loss": float(self.min_loss),
            "scheme": self.scheme,
            "n_minimizers": self.n_minimizers,
            "witness_stay": self.witness_stay.to_dict() if self.witness_stay else None,
            "witness_leave": self.witness_leave.to_dict() if self.witness_leave else None,
        }


@dataclass
class TraceStep:
    tilde_u: tuple
    fits: list
    next_greedy_set: tuple
    chosen_next: tuple

    def to_dict(self) -> dict:
        return {"tilde_u": list(self.tilde_u),
                "next_greedy_set": [list(u) for u in self.next_greedy_set],
                "chosen_next": list(self.chosen_next),
                "fits": [f.to_dict() for f in self.fits]}


@dataclass
class TransitionTrace:
    scheme: str
    start: tuple
    steps: list = field(default_factory=list)
    terminated: bool = False
    step_limit_hit: bool = False

    @property
    def path(self) -> list:
        return [self.start] + [s.chosen_next for s in self.steps]

    @property
    def final(self) -> tuple:
        return self.steps[-1].chosen_next if self.steps else self.start

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "start": list(self.start),
                "path": [list(u) for u in self.path], "terminated": self.terminated,
                "step_limit_hit": self.step_limit_hit,
                "steps": [s.to_dict() for s in self.steps]}


def _qplex_init(payoff: JointPayoff, candidate):
    """Per-agent values with the candidate on top by a payoff-scaled margin, unit weights."""
    spread = float(payoff.values.max() - payoff.values.min())
    margin = spread / payoff.n_agents if spread > 0 else 1.0
    qs = [np.where(np.arange(n) == a, margin, 0.0) for n, a in zip(payoff.action_counts, candidate)]
    ws = [np.ones(payoff.action_counts) for _ in payoff.action_counts]
    return qs, ws


def qplex_candidate_fit(payoff: JointPayoff, candidate, policy: JointPolicy = None,
                        config: FitConfig = FitConfig(tolerance=1e-4)) -> FactorizedFit:
    """Descend from the candidate-seeded start."""
    return fit_qplex(payoff, policy, _qplex_init(payoff, candidate), config)


def _qplex_perturbation_stays(payoff, fit, candidate, policy, config, n_perturb=4, rel=0.05) -> bool:
    rng = np.random.default_rng(config.seed)
    spread = float(payoff.values.max() - payoff.values.min()) or 1.0
    for _ in range(n_perturb):
        qs = [q + rng.normal(0.0, rel * spread, q.shape) for q in fit.per_agent_q]
        ws = [np.maximum(w + rng.normal(0.0, rel, w.shape), 0.0) for w in fit.auxiliary["weights"]]
        try:
            again = fit_qplex(payoff, policy, (qs, ws), config)
        except ConvergenceError:
            return False
        if again.greedy_set != (tuple(candidate),):
            return False
    return True


def _bind(policy, tilde_u):
    return (policy or uniform()).with_reference(tilde_u)


def transition_step(scheme: str, payoff: JointPayoff, tilde_u, policy: JointPolicy = None,
                    config: FitConfig = FitConfig(), q_hat: Optional[JointPayoff] = None,
                    require_complete: bool = False):
    """Minimize the scheme's loss with the reference action fixed at tilde_u.

    Returns (list of minimizing fits, union of their greedy sets).  ResQ
    returns its constructive zero-loss fits; QPLEX and the gradient backend
    return one local solution.
    """
    tilde_u = check_action(payoff.action_counts, tilde_u)
    pol = _bind(policy, tilde_u)
    if require_complete:
        _require_complete(scheme, config)
    if scheme == IDEAL_QMIX:
        fits = ideal_qmix_minimizers(payoff, pol, config)
    elif scheme == WQMIX:
        fits = wqmix_minimizers(payoff, q_hat, tilde_u, config.alpha, pol, config)
    elif scheme == VDN:
        fits = [fit_vdn(payoff, pol)]
    elif scheme == RESQ:
        fits = resq_zero_loss_fits(payoff, tilde_u, pol)
    elif scheme == QPLEX:
        qcfg = config if config.tolerance >= 1e-6 else config.with_(tolerance=1e-4)
        fits = [qplex_candidate_fit(payoff, tilde_u, pol, qcfg)]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    union = action_set(u for f in fits for u in f.greedy_set)
    return fits, union


def iterate_transitions(scheme: str, payoff: JointPayoff, start, policy: JointPolicy = None,
                        config: FitConfig = FitConfig(), max_steps: int = 20,
                        q_hat: Optional[JointPayoff] = None) -> TransitionTrace:
    """Follow transitions until a self-transition or the step limit.

    Among several next greedy actions, staying put is preferred, otherwise
    the lexicographically smallest is taken.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    current = check_action(payoff.action_counts, start)
    trace = TransitionTrace(scheme, current)
    for _ in range(max_steps):
        fits, union = transition_step(scheme, payoff, current, policy, config, q_hat)
        chosen = current if current in union else union[0]
        trace.steps.append(TraceStep(current, fits, union, chosen))
        if chosen == current:
            trace.terminated = True
            return trace
        current = chosen
    trace.step_limit_hit = True
    return trace


def _require_complete(scheme, config):
    if scheme == QPLEX or (scheme in (IDEAL_QMIX, WQMIX) and config.backend == GRADIENT):
        backend = "gradient" if scheme == QPLEX else config.backend
        raise CapabilityError(f"{scheme} with the {backend} backend cannot enumerate all minimizers")


def classify_stable_point(scheme: str, payoff: JointPayoff, candidate, policy: JointPolicy = None,
                          config: FitConfig = FitConfig(), q_hat: Optional[JointPayoff] = None,
                          require_complete: bool = False) -> StabilityReport:
    """Strong / Weak / Unstable from the complete minimizer set, or
    StableCandidate / Unstable when only local solutions are available.
    ``require_complete`` turns the latter case into a CapabilityError."""
    if require_complete:
        _require_complete(scheme, config)
    candidate = check_action(payoff.action_counts, candidate)
    pol = _bind(policy, candidate)
    if scheme == RESQ:
        stay = resq_staying_fit(payoff, candidate, pol)
        leave = resq_leaving_fit(payoff, candidate, pol)
        fits = [f for f in (stay, leave) if f is not None]
        cls = UNSTABLE if stay is None else (WEAK if leave is not None else STRONG)
        return StabilityReport(candidate, cls, 0.0, stay, leave, scheme, len(fits))
    if scheme == QPLEX:
        qcfg = config if config.tolerance >= 1e-6 else config.with_(tolerance=1e-4)
        try:
            fit = qplex_candidate_fit(payoff, candidate, pol, qcfg)
        except ConvergenceError:
            return StabilityReport(candidate, UNSTABLE, float("nan"), None, None, scheme, 0)
        check = qplex_stationarity_check(payoff, fit.per_agent_q, fit.auxiliary["weights"], pol,
                                         qcfg.tolerance)
        fit.auxiliary["stationarity"] = check.to_dict()
        if (fit.greedy_set == (candidate,) and check.stationary
                and _qplex_perturbation_stays(payoff, fit, candidate, pol, qcfg)):
            return StabilityReport(candidate, STABLE_CANDIDATE, fit.loss, fit, None, scheme, 1)
        leave = fit if candidate not in fit.greedy_set else None
        return StabilityReport(candidate, UNSTABLE, fit.loss, None, leave, scheme, 1)
    fits, _ = transition_step(scheme, payoff, candidate, policy, config, q_hat)
    stay = [f for f in fits if candidate in f.greedy_set]
    leave = [f for f in fits if candidate not in f.greedy_set]
    min_loss = min(f.loss for f in fits)
    if fits[0].backend == GRADIENT:
        cls = STABLE_CANDIDATE if stay else UNSTABLE
    elif not stay:
        cls = UNSTABLE
    else:
        cls = WEAK if leave else STRONG
    return StabilityReport(candidate, cls, min_loss, stay[0] if stay else None,
                           leave[0] if leave else None, scheme, len(fits))


def enumerate_stable_points(scheme: str, payoff: JointPayoff, policy: JointPolicy = None,
                            config: FitConfig = FitConfig(), q_hat: Optional[JointPayoff] = None,
                            require_complete: bool = False) -> list:
    """Classify every joint action."""
    if require_complete:
        _require_complete(scheme, config)
    return [classify_stable_point(scheme, payoff, u, policy, config, q_hat)
            for u in all_actions(payoff.action_counts)]


def stable_points(reports) -> list:
    return [r.candidate for r in reports if r.is_stable]


def reference_gap_check(payoff: JointPayoff, tilde_u, epsilons,
                        config: FitConfig = FitConfig()) -> list:
    """Gap |q_tot(tilde_u) - payoff(tilde_u)| of the ideal monotone fit under a
    centralized epsilon-greedy policy, for each epsilon (worst minimizer)."""
    tilde_u = check_action(payoff.action_counts, tilde_u)
    if any(e <= 0 for e in epsilons):
        raise ValueError("epsilons must be strictly positive")
    gaps = []
    for eps in epsilons:
        fits = ideal_qmix_minimizers(payoff, centralized(eps, tilde_u), config)
        gaps.append(max(abs(float(f.q_tot[tilde_u]) - payoff[tilde_u]) for f in fits))
    return gaps


# names used by the published interface
lemma_c1_convergence_check = reference_gap_check

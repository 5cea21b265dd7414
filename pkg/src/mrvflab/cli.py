"""Command-line entry point: analyze, trace, mrvf, reproduce and gen."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .fitters import SCHEMES, CapabilityError, FitConfig, FitError
from .games import PredatorPreyEnv, env_rollouts, gen_risk_reward, one_step_pp_matrix
from .mrvf import TrainConfig, mrvf_plan, mrvf_train_one_step
from .payoff import JointPayoff, PayoffValidationError, corpus_payoff, load_payoff
from .policy import CEN_EPS, DEC_EPS, JointPolicy, uniform
from .stability import enumerate_stable_points, iterate_transitions

OUT_ENV = "MRVFLAB_OUT"
EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_CAPABILITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    inputs: dict
    config: dict
    seed: int
    outputs: list = field(default_factory=list)
    version: str = __version__
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _fmt_action(u) -> str:
    return ",".join(str(int(a)) for a in u)


def _parse_action(text: str) -> tuple:
    try:
        return tuple(int(a) for a in text.split(","))
    except ValueError:
        raise UsageError(f"bad joint action {text!r}; expected e.g. 0,2")


def _load_payoff(args) -> tuple:
    if args.corpus:
        try:
            return corpus_payoff(args.corpus), {"corpus": args.corpus}
        except KeyError as e:
            raise UsageError(str(e.args[0]))
    if args.payoff:
        try:
            with open(args.payoff) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read payoff {args.payoff}: {e}")
        if isinstance(data, dict) and "payoff" in data:
            return JointPayoff.from_dict(data["payoff"]), {"payoff": args.payoff}
        return load_payoff(args.payoff), {"payoff": args.payoff}
    raise UsageError("give --corpus KEY or --payoff FILE")


def _policy(args) -> JointPolicy:
    if args.policy == "uniform":
        return uniform()
    return JointPolicy(CEN_EPS if args.policy == "cen" else DEC_EPS, args.epsilon)


def _fit_config(args) -> FitConfig:
    return FitConfig(backend=args.backend, alpha=args.alpha, seed=args.seed)


def _csv_text(rows: list) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _emit(args, name: str, payload, rows, manifest: RunManifest, fmt: str) -> None:
    text = _csv_text(rows) if fmt == "csv" else json.dumps(payload, indent=2, default=_json_default) + "\n"
    path = args.out
    if path is None and os.environ.get(OUT_ENV):
        path = os.path.join(os.environ[OUT_ENV], f"{name}.{fmt}")
    if path is None:
        sys.stdout.write(text)
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    manifest.outputs.append(path)
    with open(path + ".manifest.json", "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, default=_json_default)
    print(path, file=sys.stderr)


def _manifest(args, inputs, config) -> RunManifest:
    return RunManifest(args.cmd + (f" {args.mode}" if getattr(args, "mode", None) else ""),
                       inputs, config, args.seed)


def cmd_analyze(args) -> int:
    payoff, inputs = _load_payoff(args)
    cfg = _fit_config(args)
    pol = _policy(args)
    t0 = time.time()
    reports = enumerate_stable_points(args.scheme, payoff, pol, cfg, payoff,
                                      require_complete=args.require_complete)
    man = _manifest(args, inputs, {"scheme": args.scheme, "fit": cfg.to_dict(), "policy": pol.to_dict()})
    man.wall_clock = time.time() - t0
    rows = [{"action": _fmt_action(r.candidate), "class": r.classification,
             "min_loss": f"{r.min_loss:.10g}"} for r in reports]
    _emit(args, f"analyze_{args.scheme}", [r.to_dict() for r in reports], rows, man, args.format or "json")
    return EXIT_OK


def cmd_trace(args) -> int:
    payoff, inputs = _load_payoff(args)
    cfg = _fit_config(args)
    pol = _policy(args)
    start = _parse_action(args.start)
    t0 = time.time()
    trace = iterate_transitions(args.scheme, payoff, start, pol, cfg, args.max_steps, payoff)
    man = _manifest(args, inputs, {"scheme": args.scheme, "fit": cfg.to_dict(), "policy": pol.to_dict(),
                                   "start": list(start), "max_steps": args.max_steps})
    man.wall_clock = time.time() - t0
    rows = [{"step": i + 1, "tilde_u": _fmt_action(s.tilde_u),
             "next_greedy_set": " ".join(_fmt_action(u) for u in s.next_greedy_set),
             "chosen_next": _fmt_action(s.chosen_next)} for i, s in enumerate(trace.steps)]
    _emit(args, f"trace_{args.scheme}", trace.to_dict(), rows, man, args.format or "json")
    return EXIT_OK


def cmd_mrvf(args) -> int:
    if args.mode == "plan":
        payoff, inputs = _load_payoff(args)
        cfg = _fit_config(args)
        pol = _policy(args)
        start = _parse_action(args.start) if args.start else None
        t0 = time.time()
        res = mrvf_plan(payoff, args.rounds, cfg, pol, start)
        man = _manifest(args, inputs, {"rounds": args.rounds, "fit": cfg.to_dict(), "policy": pol.to_dict(),
                                       "start": list(start) if start else None})
        man.wall_clock = time.time() - t0
        rows = [{"round": r.k, "prev_greedy": _fmt_action(r.prev_greedy), "greedy": _fmt_action(r.greedy),
                 "q_hat": payoff[r.greedy], "improved": f, "settled": r.settled}
                for r, f in zip(res.rounds, res.improvement_flags)]
        _emit(args, "mrvf_plan", res.to_dict(), rows, man, args.format or "json")
        return EXIT_OK
    if args.game == "riskreward":
        payoff = gen_risk_reward(args.agents, args.actions, args.seed).payoff
        inputs = {"game": "riskreward", "agents": args.agents, "actions": args.actions}
    elif args.game == "pp":
        payoff = one_step_pp_matrix(args.punishment)
        inputs = {"game": "pp", "punishment": args.punishment}
    else:
        payoff, inputs = _load_payoff(args)
    tc = TrainConfig(rounds=args.rounds, p=args.p, total_steps=args.steps, seed=args.seed,
                     eps_end=args.epsilon, eval_every=max(1, args.steps // 10))
    cfg = _fit_config(args)
    t0 = time.time()
    res = mrvf_train_one_step(payoff, tc, cfg)
    man = _manifest(args, inputs, {"train": asdict(tc), "fit": cfg.to_dict()})
    man.wall_clock = time.time() - t0
    _emit(args, "mrvf_train", res.to_dict(), res.log, man, args.format or "csv")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from . import reproduce
    t0 = time.time()
    try:
        checks = reproduce.run(args.table)
    except KeyError as e:
        raise UsageError(str(e.args[0]))
    for c in checks:
        print(c.line(), file=sys.stderr)
    if args.out or os.environ.get(OUT_ENV) or args.format:
        man = _manifest(args, {"table": args.table}, {})
        man.wall_clock = time.time() - t0
        rows = [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in checks]
        _emit(args, f"reproduce_{args.table}", [asdict(c) for c in checks], rows, man, args.format or "json")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


def cmd_gen(args) -> int:
    if args.family == "riskreward":
        game = gen_risk_reward(args.agents, args.actions, args.seed)
        payload, payoff = game.to_dict(), game.payoff
        inputs = {"family": "riskreward", "agents": args.agents, "actions": args.actions}
    elif args.family == "pp-env":
        env = PredatorPreyEnv(punishment=args.punishment)
        rows = env_rollouts(env, args.episodes, args.seed)
        inputs = {"family": "pp-env", "punishment": args.punishment, "episodes": args.episodes}
        _emit(args, "gen_pp_env", rows, rows, _manifest(args, inputs, {}), args.format or "csv")
        return EXIT_OK
    else:
        payoff = one_step_pp_matrix(args.punishment)
        payload = {"family": "pp", "punishment": args.punishment, "payoff": payoff.to_dict()}
        inputs = {"family": "pp", "punishment": args.punishment}
    rows = [{"action": _fmt_action(u), "value": payoff[u]} for u in np.ndindex(*payoff.action_counts)]
    _emit(args, f"gen_{args.family}", payload, rows, _manifest(args, inputs, {}), args.format or "json")
    return EXIT_OK


def _common(p, payoff=True, fit=True):
    if payoff:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--corpus", help="named example matrix")
        src.add_argument("--payoff", help="payoff JSON file")
    if fit:
        p.add_argument("--policy", choices=("uniform", "cen", "dec"), default="uniform")
        p.add_argument("--epsilon", type=float, default=0.01)
        p.add_argument("--alpha", type=float, default=0.1)
        p.add_argument("--backend", choices=("exhaustive", "gradient"), default="exhaustive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help=f"output file (default: stdout, or ${OUT_ENV}/<name>.<format>)")
    p.add_argument("--format", choices=("json", "csv"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mrvflab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("analyze", help="classify every joint action as a stable point or not")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.add_argument("--require-complete", action="store_true",
                   help="fail unless the full minimizer set can be enumerated")
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("trace", help="follow greedy-action transitions from a start action")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.add_argument("--start", required=True, help="joint action, e.g. 0,2")
    p.add_argument("--max-steps", type=int, default=20)
    _common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("mrvf", help="multi-round planning or tabular training")
    msub = p.add_subparsers(dest="mode", required=True)
    q = msub.add_parser("plan")
    q.add_argument("--rounds", type=int, default=3)
    q.add_argument("--start", help="default action before round 1 (all zeros)")
    _common(q)
    q.set_defaults(func=cmd_mrvf)
    q = msub.add_parser("train")
    q.add_argument("--game", choices=("riskreward", "pp", "payoff"), default="riskreward")
    q.add_argument("--agents", type=int, default=2)
    q.add_argument("--actions", type=int, default=3)
    q.add_argument("--punishment", type=float, default=-2.0)
    q.add_argument("--rounds", type=int, default=3)
    q.add_argument("--p", type=float, default=0.2, help="probability of executing a random round's greedy action")
    q.add_argument("--steps", type=int, default=50000)
    _common(q)
    q.set_defaults(func=cmd_mrvf, epsilon=0.05)

    p = sub.add_parser("reproduce", help="check fits against the embedded table values")
    p.add_argument("table", help="table2, table4, table5, table6, table7, table8 or all")
    _common(p, payoff=False, fit=False)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("gen", help="generate a game as JSON, or a random-action grid trajectory log")
    p.add_argument("family", choices=("riskreward", "pp", "pp-env"))
    p.add_argument("--episodes", type=int, default=10, help="pp-env episodes")
    p.add_argument("--agents", type=int, default=2)
    p.add_argument("--actions", type=int, default=3)
    p.add_argument("--punishment", type=float, default=-2.0)
    _common(p, payoff=False, fit=False)
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "max_steps", 1) < 1:
        ap.error("--max-steps must be at least 1")
    try:
        return args.func(args)
    except CapabilityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (UsageError, PayoffValidationError, ValueError, FitError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

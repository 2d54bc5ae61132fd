"""Command-line entry point: ``banditpref <command> [flags]``.

Flags may also come from a flat ``key = value`` file passed with ``--config``
(keys are flag names without the leading dashes); flags given on the command
line win. Exit codes: 0 success, 1 invalid input, 2 numeric failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .dynamics import OdeParams, integrate, theorem5_check
from .errors import ConfigurationError, DomainError, NumericError
from .estimators import TrainConfig
from .harness import (ESTIMATORS, ExperimentConfig, consistency_check, figure1_demo, fit_estimator,
                      montecarlo_theorem2, run_experiment)
from .multiwise import VARIANTS, fit_ids_multiwise
from .policy import DEFAULT_LAMBDA_GRID, kl_reward_curve
from .preference_model import (MultiwiseDataset, hard_instance, sample_multiwise_dataset,
                               sample_pairwise_dataset, uniform_tuples)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _batch(text: str):
    return None if text in ("full", "none") else int(text)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        key, sep, val = ln.partition("=")
        if not sep:
            raise ConfigurationError(f"config line without '=': {ln!r}")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _common(p):
    p.add_argument("--config", help="key = value file supplying defaults for the flags")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (directory for experiment)")
    p.add_argument("-v", "--verbose", action="store_true")


def _instance_flags(p):
    p.add_argument("--arms", type=int, default=10, help="number of arms K")
    p.add_argument("--samples", type=int, default=60, help="number of comparisons n")
    p.add_argument("--data", help="dataset file (overrides --arms/--samples)")


def _train_flags(p):
    p.add_argument("--estimator", choices=ESTIMATORS, default="mle")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=0.001)
    p.add_argument("--epsilon", type=float, default=1e-2, help="ridge for the pessimism penalty")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--batch-size", type=_batch, default=1, help="records per step, or 'full'")
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--variant", choices=VARIANTS, default="pairwise-split", help="label layout for M-wise data")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="banditpref", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample a dataset from the hard instance")
    _common(p)
    _instance_flags(p)
    p.add_argument("--arity", type=int, default=2, help="M > 2 draws M-wise rankings over uniform tuples")

    p = sub.add_parser("fit", help="fit one estimator and write its trace")
    _common(p)
    _instance_flags(p)
    _train_flags(p)

    p = sub.add_parser("curve", help="KL-reward sweep for one fitted estimator")
    _common(p)
    _instance_flags(p)
    _train_flags(p)
    p.add_argument("--lambda-grid", type=_floats, default=list(DEFAULT_LAMBDA_GRID))

    p = sub.add_parser("ode", help="integrate the two-timescale ODE")
    _common(p)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=1e-6)
    p.add_argument("--samples", type=float, default=1e4)
    p.add_argument("--mu", type=float, default=0.75)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--epsilon", type=float, help="also run the bound check with this epsilon")

    p = sub.add_parser("montecarlo", help="statistical checks")
    _common(p)
    p.add_argument("--check", choices=("theorem2", "consistency", "figure1"), default="theorem2")
    p.add_argument("--samples", type=int, default=501)
    p.add_argument("--arms", type=int, default=3)
    p.add_argument("--trials", type=int, default=10_000)

    p = sub.add_parser("experiment", help="loss-vs-epoch traces and KL-reward curves for several estimators")
    _common(p)
    _instance_flags(p)
    _train_flags(p)
    p.add_argument("--estimators", default="mle,pessimistic,ids", help="comma-separated subset of estimators")
    p.add_argument("--lambda-grid", type=_floats, default=list(DEFAULT_LAMBDA_GRID))
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--weighting", choices=("uniform", "mu"), default="uniform")
    p.add_argument("--r-star", type=_floats, help="true rewards when --data is given")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigurationError(f"unknown config keys: {unknown}")
        # file values become defaults so explicit flags still win
        defaults = {}
        for key, text in values.items():
            action = known[key]
            defaults[key] = action.type(text) if action.type else text
            if action.choices is not None and defaults[key] not in action.choices:
                raise ConfigurationError(f"config {key}={text!r} not one of {list(action.choices)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _load(args):
    if args.data:
        return bio.read_dataset(args.data), None
    r_star, mu = hard_instance(args.arms, args.samples)
    return sample_pairwise_dataset(mu, r_star, args.samples, args.seed), r_star


def _train_cfg(args) -> TrainConfig:
    beta = args.beta if args.estimator in ("ids", "ids_v2") else 0.0
    return TrainConfig(alpha=args.alpha, beta=beta, epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed, eval_every=args.eval_every)


def _fit(args):
    data, r_star = _load(args)
    cfg = _train_cfg(args)
    if isinstance(data, MultiwiseDataset):
        if args.estimator != "ids":
            raise ConfigurationError("M-wise datasets are fitted with --estimator ids")
        r, trace = fit_ids_multiwise(data, cfg, args.variant, truth=r_star)
        return r, trace, r_star, args.variant
    r, trace = fit_estimator(args.estimator, data, cfg, epsilon=args.epsilon, truth=r_star)
    return r, trace, r_star, None


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    if args.arity == 2:
        r_star, mu = hard_instance(args.arms, args.samples)
        data = sample_pairwise_dataset(mu, r_star, args.samples, args.seed)
    else:
        tuples, probs = uniform_tuples(args.arms, args.arity)
        data = sample_multiwise_dataset(tuples, probs, np.eye(args.arms)[0], args.samples, args.seed)
    _emit(bio.dumps_dataset(data), args.out)


def cmd_fit(args):
    r, trace, _, variant = _fit(args)
    if args.out:
        bio.write_trace(args.out, trace, variant, estimator=args.estimator, seed=args.seed)
    print("reward " + ",".join(bio.fmt(v) for v in r.values))


def cmd_curve(args):
    r, _, r_star, _ = _fit(args)
    if r_star is None:
        raise ConfigurationError("the KL-reward curve needs the simulated instance's true rewards")
    points = kl_reward_curve(r, r_star, lam_grid=args.lambda_grid)
    if args.out:
        bio.write_curve(args.out, points, estimator=args.estimator, seed=args.seed)
    else:
        for p in points:
            print(f"{p.lam:.6g},{p.kl:.6g},{p.true_reward:.6g},{p.proxy_reward:.6g}")


def cmd_ode(args):
    p = OdeParams(alpha=args.alpha, beta=args.beta, n=args.samples, mu=args.mu)
    traj = integrate(p, args.horizon)
    if args.out:
        bio.write_trajectory(args.out, traj, alpha=p.alpha, beta=p.beta, n=p.n, mu=p.mu)
    fin = traj.final
    print(f"t={fin.t:g} d={fin.d:.10g} y={fin.y:.10g} refinement_gap={traj.refinement_gap:.3g}")
    if args.epsilon is not None:
        res = theorem5_check(p, args.horizon, args.epsilon)
        verdict = {True: "PASS", False: "FAIL", None: "out of regime"}[res.passed]
        print(f"bound={res.bound:.6g} deviation={res.deviation:.6g} y_final={res.y_final:.10g} "
              f"y_floor={res.y_floor:.10g} {verdict}")


def cmd_montecarlo(args):
    if args.check == "theorem2":
        report = montecarlo_theorem2(args.samples, args.trials, args.seed)
        for line in report.lines():
            print(line)
    elif args.check == "consistency":
        errs = [consistency_check(args.arms, args.samples, args.seed + k) for k in range(args.trials)]
        for k, e in enumerate(errs):
            print(f"seed {args.seed + k}: sup error {e:.6g}")
    else:
        rep = figure1_demo(args.seed)
        print(f"arm 2 won its single comparison: {rep.tail_won_by_arm2}")
        print(f"MLE reward {rep.mle_reward}, gap(0,2) strictly decreasing: {rep.mle_diverging}")
        print(f"IDS reward {rep.ids_reward}, P(0 beats 1) = {rep.ids_p01:.4f} "
              f"(empirical {rep.empirical_win_rate:.4f})")


def cmd_experiment(args):
    cfg = ExperimentConfig(
        K=args.arms, n=args.samples, estimators=tuple(e.strip() for e in args.estimators.split(",") if e.strip()),
        alpha=args.alpha, beta=args.beta, epsilon=args.epsilon, epochs=args.epochs, batch_size=args.batch_size,
        eval_every=args.eval_every, lam_grid=tuple(args.lambda_grid), trials=args.trials, seed=args.seed,
        out=args.out or "results", weighting=args.weighting, data_path=args.data,
        r_star=None if args.r_star is None else tuple(args.r_star))
    manifest = run_experiment(cfg)
    for name, runs in manifest["summary"].items():
        for run in runs:
            print(f"{name} seed={run['seed']}: final population CE {run['final_population_loss']:.4f} "
                  f"(min {run['min_population_loss']:.4f}), true reward at largest lambda "
                  f"{run['final_true_reward']:.4f}")


COMMANDS = dict(simulate=cmd_simulate, fit=cmd_fit, curve=cmd_curve, ode=cmd_ode,
                montecarlo=cmd_montecarlo, experiment=cmd_experiment)


def main(argv=None) -> int:
    try:
        try:
            args = parse_args(argv)
        except SystemExit as exc:  # usage errors and --help
            return exc.code if isinstance(exc.code, int) else EXIT_INVALID
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, DomainError, IndexError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

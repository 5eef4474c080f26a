"""Command line entry point.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical failures.
"""

import argparse
import logging
import os
import sys

from ..exceptions import ConfigError, NumericalError, SimulationError
from . import io
from .config import load_config
from .oracles import GridToy, power_posterior_oracle, prop1_check
from .runner import METHODS, compare, run_experiment, select_hyperparameters, trial_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

PROP1_TOL = 1e-6
ORACLE_TOL = 0.5


def _parser():
    p = argparse.ArgumentParser(prog="krsel", description="Model selection with kernel recursive ABC.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--trials", type=int, help="override the configured number of trials")
        sp.add_argument("--out", help="output directory (default: config output_dir)")
        sp.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", help="run one experiment with one method")
    common(run)
    run.add_argument("--method", choices=METHODS, default="krsel")
    common(sub.add_parser("compare", help="run the proposed method and both baselines on the same data"))
    common(sub.add_parser("hypersearch", help="select (s, delta) for every trial"))
    oracle = sub.add_parser("oracle", help="tractable-model checks")
    common(oracle, config_required=False)
    return p


def _config(args):
    return load_config(args.config, seed=args.seed, trials=args.trials, output_dir=args.out)


def _run(args):
    cfg = _config(args)
    _, metrics = run_experiment(cfg, args.method, cfg.output_dir)
    io.write_json(os.path.join(cfg.output_dir, "config.json"), cfg.to_dict())
    print(f"{args.method}: model_error={metrics.model_error:.3f} mean_data_error={metrics.mean_data_error:.4g}")


def _compare(args):
    cfg = _config(args)
    results = compare(cfg, cfg.output_dir)
    io.write_json(os.path.join(cfg.output_dir, "config.json"), cfg.to_dict())
    for method, (_, m) in results.items():
        print(f"{method}: model_error={m.model_error:.3f} mean_data_error={m.mean_data_error:.4g}")


def _hypersearch(args):
    cfg = _config(args)
    exp = cfg.resolve()
    rows = []
    for t in range(cfg.trials):
        seed = trial_seed(cfg, t)
        y, _ = exp.observe(cfg.truth_model, seed)
        s, d, scores = select_hyperparameters(y, cfg, seed)
        rows += [[t, seed, ss, dd, err, int((ss, dd) == (s, d))] for ss, dd, err in scores]
        print(f"trial {t}: s={s:g} delta={d:g}")
    io.write_rows(
        os.path.join(cfg.output_dir, "hyperparameters.csv"),
        ["trial", "seed", "bandwidth_scale", "delta", "heldout_error", "selected"],
        rows,
    )


def _oracle(args):
    seed = 0 if args.seed is None else args.seed
    trials = 10 if args.trials is None else args.trials
    out = args.out or "oracle"
    rows, ok = [], True
    for label, toy in (("prop1_alpha0.01", GridToy()), ("prop1_alpha1", GridToy(dirichlet_alpha=1.0))):
        for N in (1, 2):
            d = prop1_check(toy, N)
            passed = d <= PROP1_TOL
            ok &= passed
            rows.append([f"{label}_N{N}", seed, d, int(passed)])
    hits = 0
    for t in range(trials):
        traj = power_posterior_oracle(seed + t)
        passed = traj[-1] < ORACLE_TOL and traj[-1] < traj[0]
        hits += passed
        rows.append(["power_posterior", seed + t, traj[-1], int(passed)])
    ok &= hits >= 0.8 * trials
    io.write_rows(os.path.join(out, "oracle.csv"), ["check", "seed", "value", "passed"], rows)
    for r in rows:
        print(f"{r[0]} seed={r[1]} value={r[2]:.3g} {'PASS' if r[3] else 'FAIL'}")
    if not ok:
        raise NumericalError("oracle checks failed", power_posterior_passes=hits, trials=trials)


COMMANDS = {"run": _run, "compare": _compare, "hypersearch": _hypersearch, "oracle": _oracle}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SimulationError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: ``sweep`` (run a config file), ``preset <name>`` (run a canned
experiment), ``train`` (fit and save unfolded parameters), ``flops`` (print
the multiplication budget for a geometry), ``selftest`` (run the invariant
suites).  Exit status is 0 on success, 2 on usage or config errors, 1 on
runtime failures.
"""

import argparse
import logging
import os
import sys

from .errors import ConfigError, NumericalFailure, ParamsFormatError, TrainingDivergence
from .flops import flops_estimate
from .harness import (
    PRESET_NAMES,
    override,
    parse_config,
    preset,
    run_ber_sweep,
    train_for_point,
)
from .report import emit_csv, emit_plot
from .selftest import DEFAULT_CASES, run_all
from .unfolded import save_params


def _add_run_flags(sub):
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--trials", type=int, default=None,
                     help="override trials per SNR point")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--parallelism", type=int, default=None,
                     help="worker processes (default: MIMO_JED_THREADS or 1)")
    sub.add_argument("--format", choices=("csv", "svg", "both"), default="csv",
                     help="which artifacts to write")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jedmimo",
        description="Joint channel estimation and symbol detection simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    sweep = subs.add_parser("sweep", help="run one experiment config file")
    sweep.add_argument("--config", required=True, help="key = value config file")
    _add_run_flags(sweep)
    sweep.set_defaults(func=_cmd_sweep)

    pre = subs.add_parser("preset", help="run a canned experiment")
    pre.add_argument("name", choices=PRESET_NAMES)
    _add_run_flags(pre)
    pre.set_defaults(func=_cmd_preset)

    tr = subs.add_parser("train", help="train unfolded parameters and save them")
    tr.add_argument("--config", required=True,
                    help="config file with algorithm = jed_u_admm")
    tr.add_argument("--seed", type=int, default=None, help="override the config seed")
    tr.add_argument("--out", default=".", help="output directory")
    tr.set_defaults(func=_cmd_train)

    fl = subs.add_parser("flops", help="print the multiplication budget")
    fl.add_argument("--algo", required=True,
                    choices=("jed_am", "jed_admm", "jed_u_admm"))
    fl.add_argument("--n", required=True, type=int, help="receive antennas N")
    fl.add_argument("--k", required=True, type=int, help="transmitters K")
    fl.add_argument("--tt", required=True, type=int, help="pilot length T_t")
    fl.add_argument("--td", required=True, type=int, help="data length T_d")
    fl.add_argument("--l", type=int, default=1, help="iterations or layers")
    fl.set_defaults(func=_cmd_flops)

    st = subs.add_parser("selftest", help="run the randomized invariant suites")
    st.add_argument("--cases", type=int, default=DEFAULT_CASES,
                    help="random cases per suite")
    st.set_defaults(func=_cmd_selftest)
    return parser


def _emit(results, out_dir, stem, fmt):
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        path = os.path.join(out_dir, stem + ".csv")
        emit_csv(results, path)
        written.append(path)
    if fmt in ("svg", "both"):
        path = os.path.join(out_dir, stem + ".svg")
        emit_plot(results, path, title=stem)
        written.append(path)
    return written


def _print_sweep(result):
    cfg = result.config
    print(f"{cfg.name}: {cfg.algorithm} {cfg.n_rx}x{cfg.n_tx}, "
          f"{cfg.trials} trials/point")
    for p in result.points:
        extra = f"  failed={p.trials_failed}" if p.trials_failed else ""
        print(f"  snr={p.snr_db:g} dB  ber={p.ber:.3e}  stderr={p.stderr:.1e}"
              f"  bits={p.bits_total}{extra}")


def _cmd_sweep(args):
    config = override(parse_config(args.config), args.trials, args.seed)
    result = run_ber_sweep(config, args.parallelism)
    _print_sweep(result)
    for path in _emit(result, args.out, config.name, args.format):
        print(f"wrote {path}")
    return 0


def _cmd_preset(args):
    configs = [override(c, args.trials, args.seed) for c in preset(args.name)]
    results = []
    for config in configs:
        result = run_ber_sweep(config, args.parallelism)
        _print_sweep(result)
        results.append(result)
    for path in _emit(results, args.out, args.name, args.format):
        print(f"wrote {path}")
    return 0


def _cmd_train(args):
    config = parse_config(args.config)
    if config.algorithm != "jed_u_admm":
        raise ConfigError("algorithm: train needs jed_u_admm, "
                          f"got {config.algorithm!r}")
    if args.seed is not None:
        config = override(config, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    for pi, snr_db in enumerate(config.snr_grid_db):
        params, meta, history = train_for_point(config, snr_db, pi)
        path = os.path.join(args.out, f"{config.name}-snr{snr_db:g}.params")
        save_params(path, params, meta)
        print(f"snr={snr_db:g} dB  loss {history[0]:.4g} -> {history[-1]:.4g}"
              f"  wrote {path}")
    return 0


def _cmd_flops(args):
    report = flops_estimate(args.algo, args.n, args.k, args.tt, args.td, args.l)
    print(f"algorithm      {args.algo}")
    print(f"init           {report.init_flops:,}")
    print(f"per-iteration  {report.per_iteration_flops:,}")
    print(f"iterations     {report.iterations}")
    print(f"total          {report.total_flops:,}")
    return 0


def _cmd_selftest(args):
    results = run_all(cases=args.cases)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        detail = f"  ({r.detail})" if r.detail else ""
        print(f"{r.name:24s} {status}  {r.cases} cases{detail}")
        ok = ok and r.passed
    return 0 if ok else 1


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParamsFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, TrainingDivergence, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

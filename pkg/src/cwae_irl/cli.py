"""Command-line front end.

Subcommands::

    cwae-irl gen      --config c.ini --seed 0 --out runs/gen
    cwae-irl train    --config c.ini --seed 0 --out runs/cwae-0
    cwae-irl baseline --method maxent --config c.ini --seed 0 --out runs/maxent-0
    cwae-irl eval     --out runs/cwae-0
    cwae-irl report   --out summary.csv runs/*
"""

import argparse
import csv
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import CwaeIrlError
from .evaluation import METRICS_COLUMNS, read_metrics, write_metrics
from .experiment import (
    aggregate_reports,
    build_env,
    evaluate_run,
    make_objectworld_dataset,
    run_experiment,
    with_method,
)


def _config(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config, args.seed, args.env)
    cfg = ExperimentConfig(env_name=args.env or "objectworld", seed=args.seed or 0)
    if cfg.env_name == "pendulum":
        from .envs.pendulum import PendulumSpec
        cfg = replace(cfg, env=PendulumSpec())
    elif args.seed is not None:
        cfg = replace(cfg, env=replace(cfg.env, placement_seed=args.seed))
    return with_method(cfg, cfg.method)


def _print_report(report):
    print(",".join(METRICS_COLUMNS))
    row = asdict(report)
    print(",".join(f"{row[c]:.6f}" if isinstance(row[c], float) else str(row[c]) for c in METRICS_COLUMNS))


def cmd_gen(args):
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    env = build_env(cfg)
    if cfg.env_name == "objectworld":
        dataset = make_objectworld_dataset(cfg, env)
        env.placement.save(out / "placement.txt")
    else:
        from .dqn import train_dqn_pendulum
        from .expert import sample_trajectories
        dqn = train_dqn_pendulum(cfg.env, cfg.expert.dqn)
        dqn.online.save(out / "dqn.txt")
        dataset = sample_trajectories(env, dqn.policy, cfg.expert.count or 25,
                                      cfg.expert.length or cfg.env.episode_len, cfg.expert_seed,
                                      meta={"policy": "dqn"})
    dataset.save(out / "dataset.csv")
    print(f"wrote {len(dataset.trajectories)} trajectories to {out / 'dataset.csv'}")


def cmd_train(args):
    cfg = _config(args)
    if cfg.method != "cwae":
        cfg = with_method(cfg, "cwae")
    _print_report(run_experiment(cfg, args.out, args.timing))


def cmd_baseline(args):
    cfg = _config(args)
    if cfg.method != args.method:
        cfg = with_method(cfg, args.method)
    _print_report(run_experiment(cfg, args.out, args.timing))


def cmd_eval(args):
    report = evaluate_run(args.out)
    write_metrics([report], Path(args.out) / "eval_metrics.csv", include_seconds=False)
    _print_report(report)


def cmd_report(args):
    reports = []
    for run in args.runs:
        path = Path(run) / "metrics.csv" if Path(run).is_dir() else Path(run)
        reports += read_metrics(path)
    rows = aggregate_reports(reports)
    if not rows:
        raise CwaeIrlError("no metrics found")
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if fh is not sys.stdout:
            fh.close()


def build_parser():
    p = argparse.ArgumentParser(prog="cwae-irl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="sectioned key=value config file")
        sp.add_argument("--seed", type=int, help="global seed (overrides the config)")
        sp.add_argument("--env", choices=("objectworld", "pendulum"))
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--timing", action="store_true", help="record wall-clock seconds in metrics.csv")

    common(sub.add_parser("gen", help="generate an expert dataset"))
    common(sub.add_parser("train", help="train CWAE-IRL end to end"))
    b = sub.add_parser("baseline", help="run a baseline IRL method")
    common(b)
    b.add_argument("--method", required=True, choices=("maxent", "deep-maxent", "birl"))
    e = sub.add_parser("eval", help="recompute metrics from a run directory")
    e.add_argument("--out", required=True, help="run directory")
    r = sub.add_parser("report", help="aggregate metrics across runs")
    r.add_argument("runs", nargs="+", help="run directories or metrics CSV files")
    r.add_argument("--out", help="summary CSV path (default: stdout)")
    return p


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "baseline": cmd_baseline,
            "eval": cmd_eval, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except CwaeIrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

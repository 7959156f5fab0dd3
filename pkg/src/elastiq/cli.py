"""Command-line entry point: ``elastiq {simulate,train,estimate,evaluate,pipeline}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ElastiqError, StageError
from .pipeline import (
    load_run_config,
    mark_failed,
    read_estimates_csv,
    run_pipeline,
    stage_estimate,
    stage_evaluate,
    stage_simulate,
    stage_split,
    stage_train,
    truth_for,
)

log = logging.getLogger("elastiq")


def _simulate(cfg) -> None:
    from .market.scenario import write_oracle_csv

    ds, sim = stage_simulate(cfg)
    if sim is None:
        raise ElastiqError("simulate needs a scenario")
    anchors = sim.anchors()
    anchors = anchors[anchors + 9 <= len(ds)]
    write_oracle_csv(cfg.out / "oracle.csv", ds, anchors, sim.oracle_matrix(anchors), sim.scenario.dlambda)
    print(f"wrote {cfg.out / 'dataset.csv'} and {cfg.out / 'oracle.csv'} ({len(ds)} periods, {len(anchors)} anchors)")


def _dataset_cfg(cfg):
    """Later stages read the simulated dataset from the output directory when no dataset is configured."""
    if cfg.dataset is None:
        path = cfg.out / "dataset.csv"
        if not path.exists():
            raise ElastiqError(f"dataset file not found: {path} (run `elastiq simulate` first or set 'dataset')")
        cfg.dataset = str(path)
        cfg.scenario = None
    return cfg


def _train(cfg) -> None:
    cfg = _dataset_cfg(cfg)
    ds, _ = stage_simulate(cfg)
    stage_train(cfg, stage_split(cfg, ds))
    print(f"wrote bundle to {cfg.out / 'bundle'}")


def _estimate(cfg) -> None:
    cfg = _dataset_cfg(cfg)
    ds, _ = stage_simulate(cfg)
    stage_estimate(cfg, stage_split(cfg, ds), None)
    print(f"wrote {cfg.out / 'estimates.csv'}")


def _evaluate(cfg) -> None:
    cfg = _dataset_cfg(cfg)
    ds, _ = stage_simulate(cfg)
    prep = stage_split(cfg, ds)
    estimates = read_estimates_csv(cfg.out / "estimates.csv", prep.test.timestamp_strs())
    reports = stage_evaluate(cfg, prep, estimates, truth_for(cfg, prep))
    for r in reports:
        print(f"{r.method:8s} rmse={r.rmse:.4f} mae={r.mae:.4f}")


COMMANDS = {"simulate": _simulate, "train": _train, "estimate": _estimate, "evaluate": _evaluate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastiq", description="Time-varying price elasticity estimation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "simulate a scenario and write dataset.csv plus oracle.csv",
        "train": "train the two-stage estimator and save a bundle",
        "estimate": "estimate elasticities on the test split with every configured method",
        "evaluate": "compare estimates.csv against the oracle and write metric reports",
        "pipeline": "run every stage end to end",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="run config (JSON) or, for simulate, a scenario file")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--out", default=None, help="output directory (overrides ELASTIQ_OUT and the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_run_config(args.config, seed=args.seed, output_dir=args.out)
    except ElastiqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "pipeline":
        status = run_pipeline(cfg)
        if status:
            reason = (cfg.out / "FAILED").read_text().splitlines()[-1]
            print(f"error: {reason} (see {cfg.out / 'FAILED'})", file=sys.stderr)
        else:
            print(f"wrote reports to {cfg.out}")
        return status
    try:
        COMMANDS[args.command](cfg)
    except Exception as exc:
        err = exc if isinstance(exc, StageError) else StageError(args.command, str(exc))
        mark_failed(cfg.out, err)
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point ``moran-limits``."""

from __future__ import annotations

import argparse
import sys

from .experiments import EXPERIMENTS, ExperimentConfig, convergence_study, run_experiment


def _parser():
    p = argparse.ArgumentParser(prog="moran-limits", description="Moran-process continuum limits: runs and convergence studies.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one experiment"), ("study", "run a convergence study")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--experiment", choices=EXPERIMENTS, help="experiment name (overrides the config file)")
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="random seed")
        s.add_argument("--cells", type=int, help="grid cells for the continuum solver")
        s.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return p


def _config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = ExperimentConfig.load(args.config).__dict__.copy()
    if args.experiment:
        data["experiment"] = args.experiment
    if "experiment" not in data:
        raise ValueError("either --experiment or a config file naming an experiment is required")
    for key, value in (("out_dir", args.out), ("seed", args.seed), ("cells", args.cells)):
        if value is not None:
            data[key] = value
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        report = convergence_study(cfg) if args.command == "study" else run_experiment(cfg)
        paths = report.write()
    except (ValueError, OSError) as exc:
        print(f"moran-limits: error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"moran-limits: failed: {exc}", file=sys.stderr)
        return 1
    for w in report.warnings:
        print(f"moran-limits: warning: {w}", file=sys.stderr)
    if not args.quiet:
        print(f"{cfg.experiment}: {report.metadata['wall_time']:.2f} s")
        for row in report.summary:
            print("  " + "  ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
        for path in paths:
            print(f"  wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

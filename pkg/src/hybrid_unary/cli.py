"""Command-line entry point: ``hybrid-unary <stage> [--config F] [--seed S] [--out D]``.

Exit codes: 0 success, 2 usage, 3 invalid config or missing artifact,
4 stage failure, 5 netlist/model equivalence failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .costmodel import CoefficientError, ComparisonError

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_STAGE = 4
EXIT_EQUIVALENCE = 5

DEFAULT_CONFIG = Path("configs/default.json")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help=f"run config JSON (default: {DEFAULT_CONFIG} if present)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", type=Path, default=None, help="run directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hybrid-unary",
                                description="Hybrid unary-binary MLP compiler pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "normalize datasets and fix the train/test split",
        "train": "train and quantize the binary baseline",
        "hybridize": "move layer 1 onto unary rate patterns",
        "pow2": "power-of-two retraining of the output layer",
        "lower": "lower every variant to a gate-level netlist",
        "simulate": "check netlists against their models",
        "cost": "area and power proxies per coefficient table",
        "report": "comparison table and summary",
        "run": "all stages in order",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        if name == "report":
            sp.add_argument("--include", type=Path, nargs="*", default=[],
                            help="further run directories to aggregate")
    hdl = sub.add_parser("export-hdl", parents=[common], help="write structural Verilog")
    hdl.add_argument("--dataset", default=None, help="only this dataset")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    config = args.config
    if config is None and DEFAULT_CONFIG.exists():
        config = DEFAULT_CONFIG
    try:
        cfg = pipeline.load_config(config, seed=args.seed, out=args.out)
        run = pipeline.Run(cfg)
        if args.command == "run":
            for stage in pipeline.STAGES:
                pipeline.run_stage(run, stage)
            print((run.out / "summary.txt").read_text(), end="")
        elif args.command == "export-hdl":
            for path in pipeline.export_hdl(run, args.dataset):
                print(path)
        else:
            pipeline.run_stage(run, args.command)
            if args.command == "report":
                if args.include:
                    rows = pipeline.aggregate_reports([run.out, *args.include])
                    print(f"{len(rows)} rows across {1 + len(args.include)} runs")
                print((run.out / "summary.txt").read_text(), end="")
    except pipeline.EquivalenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EQUIVALENCE
    except (pipeline.ConfigError, CoefficientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (pipeline.StageError, ComparisonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line interface.

Usage: uae <train|attack|augment|mine-calibrate|report> [options]
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from src.cli.commands import cmd_attack, cmd_augment, cmd_mine_calibrate, cmd_report, cmd_train, parse_split
from src.core.config import settings
from src.services.diagnostics import K_SWEEP
from src.utils.errors import UAEError
from src.utils.logging import run_context, setup_logging

logger = logging.getLogger(__name__)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Run config (TOML); defaults are used when omitted")
    parser.add_argument("--run-id", dest="run_id", help="Run identifier (default derived from the config)")
    parser.add_argument("--seed", type=int, help="Root seed")
    parser.add_argument("--output", help="Output root directory")
    parser.add_argument("--workers", type=int, help="Worker processes for per-sample attacks")
    parser.add_argument("--log-level", dest="log_level", default=None, help="Logging level (default from UAE_LOG_LEVEL)")
    parser.add_argument("--no-progress", dest="progress", action="store_false", help="Hide progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uae", description="MINE-guided MinMax adversarial examples and UAE augmentation")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    train = sub.add_parser("train", help="Train a model from the config")
    _common(train)
    train.set_defaults(handler=cmd_train)

    attack = sub.add_parser("attack", help="Attack one or more samples, writing traces and a summary")
    _common(attack)
    attack.add_argument("--sample", type=int, action="append", help="Sample index to attack (repeatable)")
    attack.add_argument("--samples", type=int, default=10, help="Attack the first N samples when --sample is absent")
    attack.add_argument("--split", choices=("train", "test"), default="test", help="Split to draw samples from")
    attack.add_argument("--method", choices=("minmax", "penalty"), help="Attack method")
    attack.add_argument("--iterations", type=int, help="MinMax iterations T")
    attack.add_argument(
        "--compare-penalty",
        dest="compare_penalty",
        type=parse_split,
        nargs="+",
        metavar="A,B",
        help="Run the penalty attack with A search steps x B iterations next to MinMax with T = A*B",
    )
    attack.add_argument("--no-plot", dest="no_plot", action="store_true", help="Skip the MI trace figure")
    attack.set_defaults(handler=cmd_attack)

    augment = sub.add_parser("augment", help="Augment, retrain from scratch and report")
    _common(augment)
    augment.add_argument("--augmentation", choices=("mine-uae", "l2-uae", "gaussian", "flip", "rotation", "flip-rotation"))
    augment.set_defaults(handler=cmd_augment)

    calibrate = sub.add_parser("mine-calibrate", help="Check MINE against the analytic MI of Gaussian pairs")
    _common(calibrate)
    calibrate.add_argument("--k-ablation", dest="k_ablation", action="store_true", help="Also sweep K and write k-ablation.csv")
    calibrate.add_argument("--ks", type=int, nargs="+", default=list(K_SWEEP), metavar="K", help="K values of the sweep")
    calibrate.add_argument("--ablation-sample", dest="ablation_sample", type=int, default=0, help="Training sample used by the sweep")
    calibrate.add_argument("--ablation-steps", dest="ablation_steps", type=int, default=200, help="MINE ascent steps per K")
    calibrate.add_argument("--ablation-repeats", dest="ablation_repeats", type=int, default=3, help="Seeds per K")
    calibrate.add_argument("--stationarity", action="store_true", help="Also run the stationarity rate study")
    calibrate.add_argument("--stationarity-seeds", dest="stationarity_seeds", type=int, default=20, help="Seeds of the stationarity study")
    calibrate.add_argument(
        "--horizons", type=int, nargs=2, default=[100, 400], metavar=("SHORT", "LONG"), help="Prefix-minimum horizons"
    )
    calibrate.set_defaults(handler=cmd_mine_calibrate)

    report = sub.add_parser("report", help="Aggregate the result ledgers into text tables")
    _common(report)
    report.add_argument("--ledger-dir", dest="ledger_dir", help="Directory holding the ledgers (default: output root)")
    report.set_defaults(handler=cmd_report)
    return parser


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse `argv` and run the subcommand.

    Returns:
        0 on success, 1 on a library error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0

    setup_logging(args.log_level or settings.LOG_LEVEL)
    with run_context(args.run_id or args.command):
        try:
            return args.handler(args)
        except UAEError as e:
            logger.error(f"{args.command} failed: {e}")
            for detail in getattr(e, "errors", []) or []:
                logger.error(f"  {'.'.join(detail.loc)}: {detail.msg}")
            return 1


def main() -> None:
    sys.exit(run_command())

"""Command-line front end for the likelihood embedding experiments"""

import argparse
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from .. import __version__
from ..config import get_settings
from ..config.experiment import load_experiment_config, parse_override_args
from ..core.errors import LikelihoodEmbeddingError
from ..utils.file_utils import RunManifest, write_manifest
from .experiments import RUNNERS

logger = logging.getLogger(__name__)

COMMANDS = {
    "validate": "pointwise_validation",
    "phase-transition": "phase_transition",
    "cauchy-decay": "cauchy_decay",
    "train-gmm": "train_gmm",
    "clinical-trial": "clinical_trial",
}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BOUND_VIOLATION = 2


def create_parser() -> argparse.ArgumentParser:
    """Build the argument parser; experiment parameters are passed as extra --key value pairs"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file with an [experiment] table")
    common.add_argument("--seed", type=int, required=True, help="Master seed")
    common.add_argument("--out", type=Path, help="Output directory (default: <output_dir>/<command>)")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument("--log-level", help="Logging level (default from settings)")

    parser = argparse.ArgumentParser(
        prog="likelihood-embeddings",
        description="Audit likelihood-preserving dataset embeddings and reproduce the experiment series",
        epilog="Any experiment parameter can be overridden with --<name> <value>.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "Pointwise validation on the Gaussian family (m = 1, 2)",
        "phase-transition": "Gaussian error against embedding dimension",
        "cauchy-decay": "Cauchy quantile-embedding error against embedding dimension",
        "train-gmm": "Train and calibrate a learned embedding for a Gaussian mixture",
        "clinical-trial": "Multi-site trial power curve for federated summaries",
    }
    for command, text in helps.items():
        subparsers.add_parser(command, parents=[common], help=text, description=text)
    return parser


def configure_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _log_progress(progress: float, description: str):
    logger.info("%3.0f%% %s", 100.0 * progress, description)


def launch_app(argv: Optional[List[str]] = None) -> int:
    """
    Run one experiment subcommand

    Args:
        argv: Command-line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code: 0 when every bound check passed, 2 on a bound violation,
        1 on an operational error
    """
    parser = create_parser()
    args, extra = parser.parse_known_args(argv)
    settings = get_settings()
    configure_logging(args.log_level or settings.log_level)

    experiment = COMMANDS[args.command]
    out_dir = args.out or Path(settings.output_dir) / args.command
    manifest = RunManifest(config={"experiment": experiment, "seed": args.seed}, toolkit_version=__version__,
                           started_at=_now())
    exit_code = EXIT_ERROR
    try:
        settings.validate()
        if args.threads is not None and args.threads < 1:
            raise ValueError("--threads must be at least 1")
        config = load_experiment_config(experiment, args.seed, out_dir, args.config, parse_override_args(extra))
        manifest.config = config.to_dict()
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.info("🚀 Starting %s (seed=%d) -> %s", experiment, args.seed, out_dir)

        runner = RUNNERS[experiment]
        if experiment in ("train_gmm", "clinical_trial"):
            outcome = runner(config, args.threads, _log_progress)
        else:
            outcome = runner(config, args.threads)

        for path in outcome.outputs:
            manifest.add_output(path, out_dir)
        exit_code = EXIT_BOUND_VIOLATION if outcome.violations else EXIT_OK
    except (LikelihoodEmbeddingError, ValueError, OSError) as e:
        logger.error("❌ %s failed: %s", experiment, e)

    manifest.finished_at = _now()
    manifest.exit_code = exit_code
    try:
        write_manifest(manifest, out_dir)
    except OSError as e:
        logger.error("❌ Could not write manifest: %s", e)
        exit_code = EXIT_ERROR
    return exit_code


def main():
    sys.exit(launch_app())


if __name__ == "__main__":
    main()

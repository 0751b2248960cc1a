"""
Command-line entry point of the BENDR toolkit.

Commands:
    preprocess  - Filter, resample, map and scale recordings; write chunks and a manifest.
    pretrain    - Masked contrastive pretraining on preprocessed chunks.
    finetune    - Cross-validated fine-tuning of one transfer variant on a downstream dataset.
    evaluate    - Per-sequence contrastive accuracy of a checkpoint.
    sweep       - Contrastive accuracy of a checkpoint across sequence lengths.

Usage:
    bendr <command> [--config PATH] [--seed N] [--checkpoint PATH] [--out PATH]

Example:
    bendr preprocess --config configs/desk.toml
    bendr pretrain --config configs/desk.toml --seed 1
    bendr finetune --config configs/mmi.toml --checkpoint runs/final.ckpt

Flags override the matching fields of the configuration file. Without `--config` every
setting takes its default.

Exit codes:
    0   success
    1   user error (invalid configuration, unreadable input, missing checkpoint)
    2   numerical failure (non-finite loss or gradient)
"""

import argparse
import sys
from importlib import import_module
from typing import List, Optional

from bendr.app.config import RunConfig
from bendr.app.core.exceptions import BendrError, NonFiniteError
from bendr.app.core.logger import get_logger, setup_logging


COMMANDS = ("preprocess", "pretrain", "finetune", "evaluate", "sweep")

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_NON_FINITE = 2

logger = get_logger("manage")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bendr", description="Self-supervised pretraining and fine-tuning on raw EEG.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="Override the run seed")
    parser.add_argument("--checkpoint", help="Checkpoint to resume from or evaluate")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--data-dir", help="Directory of input recordings (preprocess)")
    parser.add_argument("--no-color", action="store_true", help="Plain log level names")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Load the configuration file (or defaults) and apply the command-line overrides.

    Raises:
        ConfigError: If the configuration file is missing or invalid.
    """
    config = RunConfig.load(args.config) if args.config else RunConfig()
    config.command = args.command
    if args.seed is not None:
        config.seed = args.seed
    overrides = {"checkpoint": args.checkpoint, "out": args.out, "data_dir": args.data_dir}
    config.paths = config.paths.model_copy(update={k: v for k, v in overrides.items() if v is not None})
    return config


def run(config: RunConfig):
    """ Dispatch to `bendr.commands.<command>.main(config)`. """
    command = import_module(f"bendr.commands.{config.command}")
    return command.main(config)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the command and map failures onto exit codes.

    Returns:
        int: Process exit code.
    """
    args = build_parser().parse_args(argv)
    setup_logging(use_colors=not args.no_color and sys.stderr.isatty())
    try:
        config = resolve_config(args)
        logger.info(f"Running '{config.command}' with seed {config.seed}")
        run(config)
    except NonFiniteError as err:
        logger.error(f"Numerical failure: {err}")
        return EXIT_NON_FINITE
    except (BendrError, OSError, ValueError, KeyError) as err:
        logger.error(str(err))
        return EXIT_USER_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

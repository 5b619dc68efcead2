"""Command-line entry point: python sdro.py [-v|-q] <subcommand> [--config FILE | --preset NAME] [options]."""

import argparse
import logging
import sys

from commands import COMMANDS, ORACLE_SAMPLES, execute_command, load_experiment_data
from errors import ConfigError, DivergenceError, EvaluationDomainError, SdroError
from settings import EXIT_CONFIG_ERROR, EXIT_DIVERGENCE

logger = logging.getLogger("sdro")


def build_parser():
    parser = argparse.ArgumentParser(prog="sdro.py",
                                     description="Sinkhorn distributionally robust optimization experiments")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    noise.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    parser.add_argument("command", choices=sorted(COMMANDS))
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="INI experiment config")
    source.add_argument("--preset", help="named preset from presets/")
    parser.add_argument("--seed", type=int, help="overrides the dataset and solver seeds")
    parser.add_argument("--out-dir", help="overrides [output] dir")
    parser.add_argument("--workers", type=int, default=1, help="threads for chain replicas and attacks")
    parser.add_argument("--theta", default="", help="comma-separated theta for sample-worstcase / oracle-check")
    parser.add_argument("--samples", type=int, default=ORACLE_SAMPLES,
                        help="chains per anchor for sample-worstcase / oracle-check")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        data = load_experiment_data(args.config, args.preset, args.seed, args.out_dir)
        return execute_command(args.command, data, workers=max(1, args.workers),
                               theta=args.theta, samples=args.samples)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG_ERROR
    except (DivergenceError, EvaluationDomainError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_DIVERGENCE
    except SdroError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())

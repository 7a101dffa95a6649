import argparse
import sys

from pihlab import (
    __version__,
    log,
)
from pihlab.console import NullProgressHandler, ProgressLine


USAGE_ERROR = 1
RUNTIME_ERROR = 2


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors exiting 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, "%s: error: %s\n" % (self.prog, message))


def add_common_cli_args(arg_parser):
    arg_parser.add_argument("--config",
        required=True,
        metavar="PATH",
        help="""JSON run-config. Omitted sections take their defaults."""
    )

    arg_parser.add_argument("--out",
        required=True,
        metavar="DIR",
        help="""Directory for output files. Created if missing."""
    )

    arg_parser.add_argument("--seed",
        type=int,
        default=None,
        help="""Overrides the PIH_SEED environment variable and the config's
                seed."""
    )

    arg_parser.add_argument("-v", "--verbose",
        action="count",
        default=0,
        help="""Log detailed information to STDERR."""
    )

    arg_parser.add_argument("-q", "--quiet",
        action="count",
        default=0,
        help="""Only log warnings and errors."""
    )

    arg_parser.add_argument("--no-progress",
        dest="progress",
        action="store_false",
        help="""Don't draw a progress line on STDERR."""
    )

    arg_parser.add_argument("--time",
        action="store_true",
        help="""Report the time taken."""
    )


def add_version_arg(arg_parser):
    arg_parser.add_argument("--version",
        action="version",
        version="%(prog)s " + __version__
    )


def create_logger(args, stream=None):
    level = log.select_level(
        (log.DEBUG, log.INFO, log.WARNING),
        log.INFO,
        args.quiet - args.verbose,
    )
    return log.StreamLogger(stream=stream or sys.stderr, min_level=level)


def create_progress_handler(args, label, stream=None):
    if not args.progress:
        return NullProgressHandler()
    return ProgressLine(stream or sys.stderr, label)

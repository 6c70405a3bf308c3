import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from config.settings import settings
from src.cli import COMMAND_MODULES
from src.cli.common import Run, common_options, tool_version
from src.exceptions import InputError, NumericalDiagnosticError

load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64
EXIT_IO = 74


class UsageError(Exception):
    pass


class CarnotArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so usage problems map to exit code 64"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = CarnotArgumentParser(
        prog="carnot-kit",
        description="Sub-Riemannian geometry on Carnot groups: algebra, metrics, Pansu calculus",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    subparsers = parser.add_subparsers(dest="command", metavar="<subcommand>")
    parent = common_options()
    for module in COMMAND_MODULES:
        module.register(subparsers, parent)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"carnot-kit: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    run = Run(args.command, args)
    try:
        code = args.handler(args, run)
        run.finish()
    except (InputError, ValidationError, FileNotFoundError) as e:
        logger.error(f"{args.command}: input error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalDiagnosticError as e:
        logger.error(f"{args.command}: {type(e).__name__}: {e}")
        print(f"diagnostic failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        logger.error(f"{args.command}: I/O error: {e}")
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())

import sys
from typing import List, Optional

from nearbest.cli import app as cli_app


def main(argv: Optional[List[str]] = None) -> None:
    """
    Console entry point for ``nearbest`` and ``python -m nearbest``.

    ``argv`` defaults to ``sys.argv[1:]``; Typer exits through SystemExit with
    the command's status (0 ok, 1 failed invariant or row, 2 bad config).
    """
    cli_app(args=argv, prog_name="nearbest")


if __name__ == "__main__":
    main(sys.argv[1:])

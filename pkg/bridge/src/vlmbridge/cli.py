"""Command-line entry point.

  bridge serve --config session.json --controller-cmd python3 controller.py

Everything after --controller-cmd is the controller's argv. Exit codes:
0 success, 1 session failure (protocol violation or backend error — an
``error`` message was sent first), 2 config error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError
from .session import EXIT_CONFIG, SessionConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridge")
    sub = parser.add_subparsers(dest="verb", required=True)
    p_serve = sub.add_parser("serve", help="run one controller session")
    p_serve.add_argument("--config", required=True, help="session config (JSON)")
    p_serve.add_argument(
        "--controller-cmd",
        required=True,
        nargs=argparse.REMAINDER,
        help="controller argv (consumes the rest of the command line)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = SessionConfig.from_file(args.config)
        return serve(config, args.controller_cmd)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

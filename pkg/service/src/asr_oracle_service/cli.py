"""Command line launcher: ``asr-oracle-service --port 8600``."""

import argparse
import os
import sys

from .app import serve
from .config import AUTH_TOKEN_ENV, DEFAULT_MODEL, ServiceConfig
from .recognizer import ModelLoadError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asr-oracle-service",
        description="Serve a speech recognizer over /transcribe and /health.",
    )
    parser.add_argument(
        "--model", default=DEFAULT_MODEL,
        help="builtin id or Hugging Face model id (default: %(default)s)",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8600)
    parser.add_argument(
        "--max-seconds", type=float, default=30.0,
        help="reject audio longer than this (default: %(default)s)",
    )
    parser.add_argument(
        "--auth-token", default=None,
        help=f"bearer token clients must send; defaults to ${AUTH_TOKEN_ENV}",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    token = args.auth_token or os.environ.get(AUTH_TOKEN_ENV) or None
    try:
        config = ServiceConfig(
            model=args.model,
            host=args.host,
            port=args.port,
            max_audio_seconds=args.max_seconds,
            auth_token=token,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        serve(config)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

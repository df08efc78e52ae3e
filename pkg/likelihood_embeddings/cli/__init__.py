"""Command-line interface and experiment harness"""

from .app import create_parser, launch_app

__all__ = ["create_parser", "launch_app"]

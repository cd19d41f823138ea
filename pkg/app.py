"""
pnkit - pigment network isolation and classification.
Command-line entry point: `python app.py <command> ...`.
"""
import argparse
import logging
import sys

from config.settings import LOG_LEVEL
from commands import extract_commands, dataset_commands, train_commands, eval_commands


def create_parser():
    """Argument parser with every subcommand registered."""
    parser = argparse.ArgumentParser(
        prog='pnkit',
        description='Isolate pigment networks in dermoscopic images and classify them as typical or atypical.',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    extract_commands.register(subparsers)
    dataset_commands.register(subparsers)
    train_commands.register(subparsers)
    eval_commands.register(subparsers)
    return parser


def main(argv=None):
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s [%(levelname)s] %(name)s: %(message)s',
    )
    return args.handler(args)


if __name__ == '__main__':
    sys.exit(main())

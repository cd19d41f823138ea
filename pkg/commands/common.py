"""
Options and error handling shared by every subcommand.
"""
import functools
import logging
import os

from models.cli_config import build_cli_config
from utils.errors import PnKitError
from config.settings import CLASS_NAMES

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1


def add_common_options(parser):
    parser.add_argument('--config', metavar='PATH', help='KEY=value settings file; flags override it')
    parser.add_argument('--seed', type=int, help='seed for every random choice (default 0)')
    parser.add_argument('--jobs', type=int, help='worker threads for per-image work (default 1)')
    parser.add_argument('--verbose', action='store_true', help='debug logging')


def add_pipeline_options(parser):
    parser.add_argument('--emit-stages', action='store_true',
                        help='also write the nine intermediate stage images per input')
    parser.add_argument('--threshold-offset', type=float, metavar='REAL',
                        help='amount subtracted from the intermeans level, in [0, 0.05] (default 0.008)')
    parser.add_argument('--min-component', type=int, metavar='INT',
                        help='smallest connected component kept, in pixels (default 100)')
    parser.add_argument('--weights', metavar='r,g,b',
                        help='channel weights after the color conversion (default 1,0,0)')
    parser.add_argument('--smoother', choices=('box10', 'gaussian'),
                        help='smoothing filter (default box10)')


def pipeline_overrides(args):
    return {
        'threshold_offset': args.threshold_offset,
        'min_component_px': args.min_component,
        'channel_weights': args.weights,
        'smoother': args.smoother,
    }


def load_config(args, overrides=None):
    """CliConfig from --config plus flags; raises ConfigError before any work starts."""
    values = {'seed': args.seed, 'jobs': args.jobs}
    values.update(overrides or {})
    return build_cli_config(args.config, values)


def print_header(command, config, **extra):
    fields = ' '.join(f"{k}={v}" for k, v in extra.items())
    print(f"# pnkit {command} seed={config.seed} jobs={config.jobs} {fields}".rstrip())


def print_split(train, val):
    def counts(items):
        return ', '.join(f"{name}={sum(1 for i in items if i.label == name)}" for name in CLASS_NAMES)
    print(f"train: {len(train)} ({counts(train)})")
    print(f"val:   {len(val)} ({counts(val)})")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def guarded(handler):
    """Turn PnKitError / OSError into exit codes (0 ok, 1 I/O, 2 config, 3 dataset)."""
    @functools.wraps(handler)
    def wrapper(args):
        try:
            return handler(args)
        except PnKitError as e:
            logger.error("%s: %s", type(e).__name__, e)
            return e.exit_code
        except OSError as e:
            logger.error("I/O error: %s", e)
            return EXIT_IO
    return wrapper

#!/usr/bin/env python3
"""
orbit-splat command line

    orbit-splat augment|fit|render|eval|export --config configs/desk.json [--set key=value ...]

Exit codes: 0 success, 2 invalid input or config, 3 non-finite loss, 4 I/O error
"""

import argparse
import logging
import sys
from typing import List, Optional, Tuple

from .. import __version__
from ..errors import InvalidArgumentError, NumericalError, OrbitSplatError
from ..runtime import configure_threads, setup_logging
from .commands import cmd_augment, cmd_eval, cmd_export, cmd_fit, cmd_render
from .config import COMMANDS, apply_overrides, load_config

logger = logging.getLogger("orbit_splat")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
EXIT_INTERRUPTED = 130


def parse_view(text: str) -> Tuple[float, float]:
    """AZ or AZ:EL in degrees"""
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AZ[:EL], got '{text}'") from None
    if len(parts) == 1:
        return parts[0], 0.0
    if len(parts) == 2:
        return parts[0], parts[1]
    raise argparse.ArgumentTypeError(f"expected AZ[:EL], got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', type=str,
                        help='JSON pipeline config (merged over the defaults)')
    common.add_argument('--set', '-s', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='Override one config value, e.g. train.epochs=5 (repeatable)')
    common.add_argument('--output', '-o', type=str,
                        help='Output directory (paths.output)')
    common.add_argument('--seed', type=int,
                        help='Seed for sampling and training')
    common.add_argument('--epochs', type=int,
                        help='Training epochs (train.epochs)')
    common.add_argument('--checkpoint', type=str,
                        help='Checkpoint file (default <output>/checkpoint.osplat)')
    common.add_argument('--verbose', '-v', action='store_true',
                        help='Debug logging')
    common.add_argument('--quiet', '-q', action='store_true',
                        help='No progress bars')

    pose = argparse.ArgumentParser(add_help=False)
    pose.add_argument('--frame', type=int, default=None,
                      help='Body state of this training frame (render/eval default 0)')
    pose.add_argument('--canonical', action='store_true',
                      help='Use the canonical pose')

    parser = argparse.ArgumentParser(prog='orbit-splat',
                                     description='Animatable 3D human avatars from a single-image orbit video')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True, metavar='{' + ','.join(COMMANDS) + '}')

    commands.add_parser('augment', parents=[common],
                        help='Super-resolve and interpolate the orbit frames')
    fit = commands.add_parser('fit', parents=[common], help='Fit the Gaussian avatar to the augmented frames')
    fit.add_argument('--resume', action='store_true',
                     help='Continue from the checkpoint if it exists')
    render = commands.add_parser('render', parents=[common, pose], help='Render views from a checkpoint')
    render.add_argument('--orbit', type=int,
                        help='Render a turntable of N evenly spaced azimuths')
    render.add_argument('--view', type=parse_view, action='append', default=[], metavar='AZ[:EL]',
                        help='Render one view (repeatable)')
    render.add_argument('--float-dump', action='store_true',
                        help='Also write raw float images')
    commands.add_parser('eval', parents=[common, pose], help='Score the eval views against ground truth')
    export = commands.add_parser('export', parents=[common, pose], help='Write the Gaussians as PLY')
    export.add_argument('--ply', type=str,
                        help='Output file (default <output>/gaussians.ply)')
    return parser


def _frame(args, default: Optional[int]) -> Optional[int]:
    if args.canonical:
        return None
    return args.frame if args.frame is not None else default


def run(args: argparse.Namespace) -> int:
    overrides = list(args.overrides)
    if args.checkpoint:
        overrides.append(f"paths.checkpoint={args.checkpoint}")
    config = apply_overrides(load_config(args.config), overrides, args.output, args.seed, args.epochs)
    progress = not args.quiet

    if args.command == 'augment':
        cmd_augment(config, progress=progress)
    elif args.command == 'fit':
        cmd_fit(config, resume=args.resume, progress=progress)
    elif args.command == 'render':
        cmd_render(config, orbit=args.orbit, views=args.view, frame=_frame(args, 0), float_dump=args.float_dump)
    elif args.command == 'eval':
        cmd_eval(config, frame=_frame(args, 0))
    elif args.command == 'export':
        cmd_export(config, frame=_frame(args, None), path=args.ply)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    threads = configure_threads()
    logger.debug("orbit-splat %s, %d threads", __version__, threads)

    try:
        return run(args)
    except NumericalError as e:
        logger.error("✗ Numerical failure: %s", e)
        return EXIT_NUMERICAL
    except InvalidArgumentError as e:
        logger.error("✗ %s", e)
        return EXIT_INVALID
    except OSError as e:
        logger.error("✗ I/O error: %s", e)
        return EXIT_IO
    except OrbitSplatError as e:
        logger.error("✗ %s", e)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())

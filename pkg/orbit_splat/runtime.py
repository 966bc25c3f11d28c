"""
Process-wide runtime settings: logging, thread count, deterministic mode
"""

import logging
import os
import sys

import torch

THREADS_ENV = "ORBIT_SPLAT_THREADS"
DETERMINISTIC_ENV = "ORBIT_SPLAT_DETERMINISTIC"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(verbose: bool = False) -> None:
    """Install a single stream handler on the root logger"""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def deterministic_requested() -> bool:
    return os.environ.get(DETERMINISTIC_ENV, "0").strip().lower() in ("1", "true", "yes", "on")


def configure_threads() -> int:
    """
    Apply ORBIT_SPLAT_THREADS / ORBIT_SPLAT_DETERMINISTIC to torch

    Returns:
        The intra-op thread count in effect
    """
    if deterministic_requested():
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)
        return 1

    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            count = int(threads)
        except ValueError:
            logging.getLogger(__name__).warning("Ignoring %s=%r (not an integer)", THREADS_ENV, threads)
        else:
            if count > 0:
                torch.set_num_threads(count)
    return torch.get_num_threads()

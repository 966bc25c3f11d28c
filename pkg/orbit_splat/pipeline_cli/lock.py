"""
Output-directory lock: one subcommand per output directory at a time
"""

import os
from pathlib import Path

LOCK_NAME = ".orbit-splat.lock"


class OutputLock:
    def __init__(self, directory: Path):
        self.path = Path(directory) / LOCK_NAME
        self._held = False

    def acquire(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            owner = self.path.read_text().strip() or "unknown"
            raise OSError(f"output directory is in use (lock {self.path}, pid {owner}); "
                          f"remove the lock file if no run is active") from None
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._held = True

    def release(self) -> None:
        if self._held:
            self.path.unlink(missing_ok=True)
            self._held = False

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()

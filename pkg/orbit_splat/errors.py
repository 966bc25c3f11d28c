"""
Error types shared by every subsystem
The CLI maps them onto exit codes (see pipeline_cli.cli)
"""

from typing import List, Optional


class OrbitSplatError(Exception):
    """Base class for all orbit-splat errors"""


class InvalidArgumentError(OrbitSplatError, ValueError):
    """Shape, dimension or range violation"""


class AssetFormatError(InvalidArgumentError):
    """Malformed asset file; message names the file and line or field"""

    def __init__(self, path, detail: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {detail}")


class CheckpointVersionError(AssetFormatError):
    """Checkpoint written by an incompatible version"""

    def __init__(self, path, expected: int, found: int):
        self.expected = expected
        self.found = found
        super().__init__(path, f"checkpoint version {found} unsupported (expected {expected})")


class UVCollisionError(InvalidArgumentError):
    """Two surface samples quantize to the same UV pixel"""


class ConfigValidationError(InvalidArgumentError):
    """Collected configuration problems"""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class RendererStateError(OrbitSplatError, RuntimeError):
    """Backward requested without a recorded forward pass"""


class NumericalError(OrbitSplatError, ArithmeticError):
    """Non-finite loss or gradient; keeps the term breakdown for the diagnostic dump"""

    def __init__(self, message: str, breakdown=None):
        self.breakdown = breakdown
        super().__init__(message)

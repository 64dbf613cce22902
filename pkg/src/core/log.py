import sys

from core.config import settings


def info(message: str) -> None:
    """Progress line; stdout is reserved for reports, so it goes to stderr."""
    if settings.SLEUTH_VERBOSE:
        print(message, file=sys.stderr)


def warn(message: str) -> None:
    print(f"Warning: {message}", file=sys.stderr)

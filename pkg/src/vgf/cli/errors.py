"""Exit-code discipline for the command line.

0 = success, 2 = usage or configuration problem, 3 = numerical failure.
Commands raise the typed exceptions; main() maps them to codes.
"""

from __future__ import annotations

__all__ = ["UsageError", "NumericalFailure", "EXIT_USAGE", "EXIT_NUMERICAL"]

EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    """Bad flags, bad config, missing files: the caller must fix the call."""


class NumericalFailure(Exception):
    """The run itself went bad (divergence, non-finite loss)."""

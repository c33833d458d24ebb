"""Exception hierarchy shared by the library and the CLI.

Exit codes used by the command line follow the error category:
1 usage, 2 input format, 3 hash mismatch, 4 numeric failure.
"""


class GraphFamError(Exception):
    """Base class for all graphfam errors."""

    exit_code = 4


class InputFormatError(GraphFamError):
    """A document (registry, graph, cache file, checkpoint) is malformed."""

    exit_code = 2


class HashMismatchError(GraphFamError):
    """Artifacts produced against different registries/configs were mixed."""

    exit_code = 3


class NumericError(GraphFamError):
    """A numeric procedure failed (non-convergence, NaN loss, bad shapes)."""

    exit_code = 4

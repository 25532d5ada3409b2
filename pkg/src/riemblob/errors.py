"""Exception hierarchy shared by all modules.

Each class carries the process exit code the CLI reports for it.
"""


class RiemBlobError(Exception):
    exit_code = 1


class UsageError(RiemBlobError, ValueError):
    exit_code = 2


class ParseError(RiemBlobError, ValueError):
    exit_code = 3


class TopologyError(ParseError):
    """Mesh connectivity violates the manifold-with-boundary contract."""


class NumericError(RiemBlobError, ArithmeticError):
    exit_code = 4


class SolverError(NumericError):
    pass


class RankDeficiencyError(NumericError):
    pass


class InsufficientDataError(RiemBlobError, ValueError):
    exit_code = 5

"""Exception hierarchy shared across the package.

The CLI maps each class to a distinct exit code, so keep the split between
parse-time, build-time and solve-time failures intact.
"""


class RatsosError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RatsosError):
    """Problem-file syntax or semantic error, with source position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", col {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class DimensionError(RatsosError):
    """Operands disagree on the ambient variable count."""


class BuildError(RatsosError):
    """A relaxation or clique structure cannot be assembled as requested."""


class OrderTooSmallError(BuildError):
    """Relaxation order below the minimum admissible order."""

    def __init__(self, k, d_min):
        self.k = k
        self.d_min = d_min
        super().__init__(f"relaxation order {k} is below the minimum order {d_min}")


class CliqueStructureError(BuildError):
    """Clique coverage, containment or running-intersection failure."""


class SolveError(RatsosError):
    """The SDP solve failed or its result cannot be used."""


class ProblemTooLargeError(SolveError):
    """Instance exceeds the internal solver size cap; export it instead."""


class InfeasibleSampleError(RatsosError):
    """The sampling oracle found no feasible point."""

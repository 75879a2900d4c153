"""
Exception hierarchy for schurkit.

Negative mathematical verdicts (a block that is not complementable, a range
that is not included) are reported as result fields. The exceptions below are
raised only when an operation cannot produce a result at all.
"""


class SchurkitError(Exception):
    """Base class for all schurkit errors."""


class DecompositionError(SchurkitError):
    """An SVD or eigen decomposition failed to converge."""


class DimensionMismatchError(SchurkitError, ValueError):
    """Operands have inconsistent shapes."""


class NotPositiveSemidefiniteError(SchurkitError, ValueError):
    """Input is not symmetric positive semidefinite within tolerance."""


class RangeInclusionError(SchurkitError):
    """R(A) is not contained in R(B), so A = BX has no solution."""

    def __init__(self, residual: float, message: str | None = None):
        self.residual = residual
        super().__init__(
            message or f"Range inclusion fails with residual {residual:.3e}",
        )


class NotComplementableError(SchurkitError):
    """The block operator fails one of the two range inclusions."""

    def __init__(self, residual_c: float, residual_b: float, message: str | None = None):
        self.residual_c = residual_c
        self.residual_b = residual_b
        super().__init__(
            message
            or (
                "Operator is not complementable: "
                f"R(C) in R(D) residual {residual_c:.3e}, "
                f"R(B*) in R(D*) residual {residual_b:.3e}"
            ),
        )


class SingularBlockError(SchurkitError):
    """The D block is singular; use the reduced Schur route instead."""


class SeriesDivergenceError(SchurkitError, ArithmeticError):
    """A partial sum overflowed to non-finite entries."""


class PreconditionError(SchurkitError):
    """A membership or complementability precondition does not hold."""


class ScenarioError(SchurkitError, ValueError):
    """A scenario file is malformed or misses command-specific inputs."""


class MatrixFormatError(SchurkitError, ValueError):
    """A matrix text file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:"
        if line is not None:
            location = f"{location}{line}:"
        super().__init__(f"{location} {message}".strip())

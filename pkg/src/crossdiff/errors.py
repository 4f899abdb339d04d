"""Exception types raised by the solver and the configuration layer."""


class CrossDiffError(Exception):
    """Base class for all package errors."""


class NonConvergence(CrossDiffError):
    """An iterative solve (Newton, CG, Picard) did not reach its tolerance."""


class NoSignChange(CrossDiffError):
    """A bracketing root solve was given an interval without a sign change."""


class StepTooLarge(CrossDiffError):
    """A positivity guard failed; the caller should retry with a smaller dt."""


class CflViolation(CrossDiffError):
    """The explicit scheme was asked to step beyond its stability limit."""


class ParseError(CrossDiffError):
    """Malformed scenario file or coefficient expression."""

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class AssumptionViolation(CrossDiffError):
    """A model fails the sampled structural audit before a run starts."""

    def __init__(self, report):
        self.report = report
        failed = ", ".join(c.name for c in report.violations)
        super().__init__(f"model violates structural assumptions: {failed}")

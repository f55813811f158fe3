"""Exception types for numerical and fitting failures.

Contract violations (bad shapes, invalid codes, out-of-range settings) raise
plain ``ValueError``; the classes here cover failures that arise from the
data or the optimization itself.
"""


class PgmmError(Exception):
    """Base class for all package-specific failures."""


class NumericalError(PgmmError):
    """A density or linear-algebra evaluation produced a non-finite result.

    Carries the component index and/or observation row that failed, when
    known, so callers can report which part of the model broke down.
    """

    def __init__(self, message, component=None, row=None):
        super().__init__(message)
        self.component = component
        self.row = row


class EmptyComponentError(NumericalError):
    """A component's total responsibility fell below one observation."""

    def __init__(self, component, count):
        super().__init__(
            f"component {component} is empty (total responsibility {count:.3g} < 1)",
            component=component,
        )
        self.count = count


class InitializationError(PgmmError):
    """Responsibility initialization kept producing degenerate components."""


class FitError(PgmmError):
    """Every start of an AECM run failed; carries per-start diagnostics."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = tuple(diagnostics)


class SearchError(PgmmError):
    """Every cell of a model-search grid failed."""

"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class Inapplicable(ValueError):
    """A closed-form result does not cover the requested parameters."""


class NumericalFailure(ArithmeticError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonConvergence(RuntimeError):
    """An iterative procedure hit its cap.

    ``trace`` carries whatever partial state the caller may want to keep
    (best iterate, bracket history, residual).
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or {}

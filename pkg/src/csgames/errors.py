"""Exception types shared across the package.

The CLI maps these onto exit codes: InputError -> 2, SolverError -> 3.
"""


class InputError(Exception):
    """Malformed user input: bad files, unknown names, invalid arguments."""


class ParseError(InputError):
    """Syntax error with source position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class SolverError(Exception):
    """Numeric failure: nonconvergence, no equilibrium found, singular system."""


class NonconvergenceError(SolverError):
    """Iteration budget exhausted before reaching the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)

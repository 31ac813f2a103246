"""Exception types shared across the package.

Two roots: InputError (bad data, arguments, or config; CLI exit code 1) and
SolverFailure (a numerical method gave up; CLI exit code 2).
"""


class InputError(ValueError):
    """Invalid user input: shapes, values, labels, or configuration."""


class RankError(InputError):
    """Regression design matrix is rank deficient."""


class SolverFailure(RuntimeError):
    """A numerical routine failed; distinct from a well-posed negative answer."""


class StallError(SolverFailure):
    """Simplex exhausted its pivot budget without reaching a verdict."""


class NotPositiveDefiniteError(SolverFailure):
    """Cholesky hit a non-positive pivot; carries the offending index."""

    def __init__(self, pivot_index, pivot_value=None):
        self.pivot_index = int(pivot_index)
        self.pivot_value = pivot_value
        msg = f"matrix is not positive definite at pivot index {pivot_index}"
        if pivot_value is not None:
            msg += f" (pivot {pivot_value:.3e})"
        super().__init__(msg)


class StaleFactorError(SolverFailure):
    """A cached factorization was reused after the penalty it baked in changed."""


class TuningError(SolverFailure):
    """Every candidate on the tuning grid failed to solve."""


class UndecidableError(SolverFailure):
    """A statistical test had no usable observations."""

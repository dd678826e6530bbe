"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`PHPPError`.
The CLI maps :class:`InfeasibleError` to exit code 3 and every other
:class:`PHPPError` to exit code 2.
"""


class PHPPError(Exception):
    pass


class InputError(PHPPError, ValueError):
    """Malformed or inconsistent input (shapes, horizons, parse failures)."""


class DomainError(InputError):
    """A value lies outside the mathematical domain of an operation."""


class RegularityError(InputError):
    """A consumption process is not regular w.r.t. its value process."""


class CapacityError(PHPPError):
    """A tree or simulation would exceed the configured size budget."""


class NotExtractableError(PHPPError):
    """No projection property exists for the given consumption process."""


class NotRepresentableError(PHPPError):
    """Deterministic relative rates cannot come from any projection property."""


class InfeasibleError(PHPPError):
    """No admissible solution exists for the requested parameters.

    ``k`` carries the first failing epoch where one is known.
    """

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class DegeneratePlanError(PHPPError, ValueError):
    pass

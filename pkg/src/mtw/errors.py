"""Exception and warning types shared across the package.

Validation problems (bad user input) derive from :class:`ValidationError`;
numerical breakdowns derive from :class:`NumericError`. The CLI maps the
former to exit code 1 and the latter to exit code 2.
"""


class MtwError(Exception):
    """Base class for all package errors."""


class ValidationError(MtwError, ValueError):
    """Input parameters violate a documented invariant."""


class DomainError(ValidationError):
    """Argument outside the domain of a special function or metric."""


class NegativeKError(ValidationError):
    pass


class NonPositiveMuError(ValidationError):
    pass


class NonPositiveMeanSnrError(ValidationError):
    pass


class DeltaRangeError(ValidationError):
    pass


class DeltaSumError(ValidationError):
    pass


class NumericError(MtwError, ArithmeticError):
    """A computation could not reach its accuracy target."""


class DimensionTooHighError(NumericError):
    """Integral form requested for more two-specular clusters than allowed."""


class PoleError(NumericError):
    """Laplace-domain argument too close to the MGF pole."""


class CombinatorialLimitError(NumericError):
    """Tuple enumeration would exceed the documented size guard."""


class TruncationWarning(RuntimeWarning):
    """A series hit its hard term cap before meeting its tolerance."""


class PhysicalConsistencyWarning(UserWarning):
    """Parameters are analytically valid but not realisable by the physical model."""

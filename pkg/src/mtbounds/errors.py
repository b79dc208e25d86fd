"""Exception hierarchy.

Every domain error derives from :class:`BoundsError` (a ``ValueError``) so
callers can catch construction and evaluation problems in one place.
Theorem violations are deliberately *not* ``ValueError``s: they signal a bug
in the library, not bad input.
"""


class BoundsError(ValueError):
    """Base class for invalid inputs to the library."""


class NormalizationError(BoundsError):
    pass


class DistinctnessError(BoundsError):
    pass


class DimensionError(BoundsError):
    pass


class WeightError(BoundsError):
    pass


class DominationError(BoundsError):
    """The reference distribution does not dominate the family."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class SizeCapError(BoundsError):
    pass


class ParameterError(BoundsError):
    pass


class SpaceMismatchError(BoundsError):
    pass


class UnsupportedReferenceError(BoundsError):
    pass


class KindError(BoundsError):
    pass


class ArityError(BoundsError):
    pass


class PhiPropertyError(BoundsError):
    pass


class ParseError(BoundsError):
    pass


class SchemaError(BoundsError):
    pass


class TheoremViolationError(AssertionError):
    """A computed upper bound fell below the quantity it claims to bound."""

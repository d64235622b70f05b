"""Exception hierarchy shared by every atvkit module."""


class AtvkitError(Exception):
    """Base class for all library errors."""


class PrefixNotSupported(AtvkitError, KeyError):
    """A path prefix has zero (or undefined) probability under the law."""

    def __str__(self):
        return Exception.__str__(self)


class InvalidHorizon(AtvkitError, ValueError):
    pass


class InvalidIndex(AtvkitError, ValueError):
    pass


class InvalidParameter(AtvkitError, ValueError):
    pass


class SpaceMismatch(AtvkitError, ValueError):
    """Two objects do not live on the same path space."""


class NotProbability(AtvkitError, ValueError):
    pass


class ParseError(AtvkitError, ValueError):
    """Malformed law document. The message carries the offending field."""


class MarginalMismatch(AtvkitError, ValueError):
    pass


class NotACoupling(AtvkitError, ValueError):
    pass


class TooLarge(AtvkitError, ValueError):
    """Instance exceeds a hard size cap."""

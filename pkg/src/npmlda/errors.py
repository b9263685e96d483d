"""Exception types raised across the package."""


class NpmldaError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(NpmldaError, ValueError):
    pass


class DimensionMismatch(NpmldaError, ValueError):
    pass


ShapeMismatch = DimensionMismatch


class NoConvergence(NpmldaError, RuntimeError):
    pass


class ClassTooSmall(NpmldaError, ValueError):
    pass


class InsufficientClasses(ClassTooSmall):
    pass


class DegenerateDensity(NpmldaError, FloatingPointError):
    pass


class PatternTooLarge(NpmldaError, ValueError):
    pass


class ParseError(NpmldaError, ValueError):
    pass


class SchemaError(NpmldaError, ValueError):
    pass


class NonFiniteValue(SchemaError):
    pass


class MissingChannel(NpmldaError, ValueError):
    pass


class ShortTrial(NpmldaError, ValueError):
    pass

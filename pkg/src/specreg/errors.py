"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the certified domain of a function."""


class OutOfRangeError(ValueError):
    """An inversion target lies outside the attainable range."""


class BasisMismatchError(ValueError):
    """Two sequence-space objects refer to different operators."""


class EnvelopeViolationError(ValueError):
    """A proposed variance envelope is violated at a grid point."""

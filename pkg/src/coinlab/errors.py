"""Exception types shared across the library."""


class CoinLabError(Exception):
    """Base class for library-specific failures."""


class DomainError(CoinLabError, ValueError):
    """Input outside an operation's mathematical domain."""


class NumericError(CoinLabError, RuntimeError):
    """A solver or quadrature did not reach its required tolerance."""


class DiscTableError(DomainError):
    """Quantity undefined for circular tables."""


class NotInDeltaError(DomainError):
    """Endpoint pair not reachable by any near-boundary orbit segment."""

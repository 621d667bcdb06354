"""Exception types raised across the package."""


class RoutingError(Exception):
    """Base class for all errors raised by georouting."""


class NoPath(RoutingError):
    """The destination cannot be reached from the source."""


class PathExplosion(RoutingError):
    """Path enumeration produced more paths than the configured cap."""


class UnexploredLink(RoutingError):
    """An index was requested for a link that has never been observed."""


class NoConvergence(RoutingError):
    """A root finder hit its iteration cap."""


class Stranded(RoutingError):
    """A hop-by-hop packet sits at a node with no route to the destination."""


class SlotCapExceeded(RoutingError):
    """A single packet used more slots than the simulator allows."""


class DegenerateDenominator(RoutingError):
    """A lower-bound term has a zero or non-finite information denominator."""


class DomainError(RoutingError, ValueError):
    """Argument outside the mathematical domain of the function."""

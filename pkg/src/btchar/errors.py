"""Exception hierarchy shared by all modules."""


class BTCharError(Exception):
    """Base class for every error raised by the package."""


class PrecisionExhausted(BTCharError):
    """A p-adic computation ran out of significant digits."""


class SingularMatrix(BTCharError):
    """A matrix that must be invertible is not."""


class BudgetExceeded(BTCharError):
    """An enumeration exceeded its configured size budget."""


class NotRegular(BTCharError):
    """The element has a repeated eigenvalue at working precision."""


class NotCompact(BTCharError):
    """The element has no fixed facet."""


class WindowEscape(BTCharError):
    """A group element moved a facet outside the computation window."""


class FacetNotFixed(BTCharError):
    """A fiber trace was requested on a facet the element does not stabilize."""


class FiberCoercionError(BTCharError):
    """A value does not lie in the fiber it is assigned to."""


class NicenessFailure(BTCharError):
    """A decomposition violates one of the required invariants."""


class NonCycle(BTCharError):
    """A chain passed to cycle reduction is not a cycle."""


class DepthInsufficient(BTCharError):
    """An averaged value failed to land in the fiber needed by the reduction."""


class KTooLarge(BTCharError):
    """The averaging group is not small enough for the requested element."""


class ConfigError(BTCharError):
    """Invalid run configuration."""

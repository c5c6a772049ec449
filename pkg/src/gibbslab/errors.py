"""Exception types shared across the package."""


class GibbsLabError(Exception):
    """Base class for all library errors."""


class ConfigError(GibbsLabError):
    """Malformed or inconsistent configuration file."""


class NonExpanding(GibbsLabError):
    """Some branch has |slope| <= 1."""


class NonMarkovImage(GibbsLabError):
    """A branch image does not align exactly with partition intervals."""


class NotCovering(GibbsLabError):
    """The admissibility matrix is not primitive (no power is positive)."""


class GenerationTooLarge(GibbsLabError):
    """Requested cylinder generation exceeds the enumeration cap."""


class InadmissibleWord(GibbsLabError):
    """A symbol word contains a forbidden transition."""


class NotPrimitive(GibbsLabError):
    """An operation requiring primitivity was called on a non-primitive map."""


class BracketFailure(GibbsLabError):
    """Root bracketing for the pressure equation failed after widening."""


class HorizonOverflow(GibbsLabError):
    """Requested orbit horizon exceeds the configured cap."""


class ParameterOrder(GibbsLabError):
    """Cover-growth parameters violate the required ordering."""


class DegenerateFit(GibbsLabError):
    """Box-count fit impossible (an indicator has no set boxes)."""


class DenominatorOverflow(GibbsLabError):
    """Exact orbit denominators exceeded the configured bit-length cap."""

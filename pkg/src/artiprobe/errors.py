"""Exception types shared across the toolkit."""


class ArtiprobeError(Exception):
    """Base class for every error raised by this package."""


class EmptyCloudError(ArtiprobeError):
    """An operation received an empty or non-finite point cloud."""


class UnknownPartError(ArtiprobeError):
    """A part id does not exist in the world."""


class PointNotOnPartError(ArtiprobeError):
    """An action's application point is too far from the target part surface."""


class UnknownProposalError(ArtiprobeError):
    """A joint spec matches none of the proposals generated for a box."""


class InvalidPriorError(ArtiprobeError):
    """A prior weight vector is negative, all-zero, or malformed."""


class DegenerateWeightsError(ArtiprobeError):
    """Every particle received zero likelihood; the observation rules them all out."""


class DegenerateRangeError(ArtiprobeError):
    """A joint range with theta_max <= theta_init cannot be normalized."""


class EmptyProbeSetError(ArtiprobeError):
    """Affordance evaluation needs at least one probe action."""


class EmptyPoolError(ArtiprobeError):
    """An operation requires a non-empty particle pool."""


class InvalidSpecError(ArtiprobeError):
    """A scene specification is malformed or generated an unsolvable scene."""


class ConfigError(ArtiprobeError):
    """An experiment config file failed validation."""

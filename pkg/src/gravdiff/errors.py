"""Exception types raised by the toolkit.

Every error that maps to a CLI exit code derives from GravdiffError; the CLI
translates ConfigError to exit 2, numeric/stability errors to exit 3 and I/O
problems to exit 4.
"""


class GravdiffError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GravdiffError):
    """Malformed or incomplete configuration input."""


class StabilityError(GravdiffError):
    """Trap configuration has no stable linearized dynamics."""


class StepSizeError(GravdiffError):
    """Integration step too coarse for the fastest timescale."""


class NonPhysicalInputError(GravdiffError):
    """State violates the uncertainty relation beyond tolerance."""


class SymmetryError(GravdiffError):
    """Operation requires an exchange-symmetric configuration."""


class PSDError(GravdiffError):
    """Matrix expected to be positive semidefinite is not."""


class DomainError(GravdiffError):
    """Input outside the mathematical domain of the formula."""


class SeedError(GravdiffError):
    """Invalid ensemble/seed configuration."""


class ProtocolError(GravdiffError):
    """Measurement-protocol timing constraint violated."""

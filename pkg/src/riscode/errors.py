"""Exception types shared across the package."""


class RiscodeError(Exception):
    """Base class for all errors raised by riscode."""


class DegenerateGeometry(RiscodeError):
    """A transmitter/receiver sits on (or too close to) the RIS panel."""


class DimensionMismatch(RiscodeError):
    """Array shapes are inconsistent with the declared panel/network dims."""


class NotReachable(RiscodeError):
    """Codebook is not expressible as row/column flips of the all -1 state."""


class LengthMismatch(RiscodeError):
    """Encoded label length does not equal M+N-1."""


class BudgetExceeded(RiscodeError):
    """Exhaustive search size exceeds the configured enumeration budget."""


class ParseError(RiscodeError):
    """Malformed dataset/checkpoint/config file content."""


class VersionMismatch(RiscodeError):
    """File schema tag does not match the supported version."""


class EmptyPartition(RiscodeError):
    """A split fraction was declared nonzero but received zero samples."""


class ConfigMismatch(RiscodeError):
    """Model/dataset configuration disagreement (e.g. label length vs head)."""


class EmptyTestSet(RiscodeError):
    """A metric was requested over zero samples."""

"""Exception types shared across the package.

The CLI maps these onto exit codes, so raising the right class matters:
contract/config problems are data errors (3), non-finite values and failed
gradient checks are numerical errors (4), broken files are format errors (3).
"""


class DyadnetError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(DyadnetError):
    """An operation was called with arguments violating its shape/value contract."""


class ConfigurationError(DyadnetError):
    """Inconsistent or impossible configuration (dims, heads, channel widths)."""


class NumericsError(DyadnetError):
    """Non-finite values encountered, or a gradient check failed."""


class FormatError(DyadnetError):
    """On-disk artifact is malformed: bad magic, version, truncation, or CRC."""


class GenerationError(DyadnetError):
    """Synthetic clip generation hit an invalid parameterisation."""

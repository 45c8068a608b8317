"""Exception hierarchy.

The CLI maps these onto exit codes: UsageError -> 1, DataError and its
subclasses -> 2, anything else -> 3.
"""


class SybilscopeError(Exception):
    """Base class for all package-specific errors."""


class UsageError(SybilscopeError):
    """Bad command-line usage or unresolvable configuration."""


class DataError(SybilscopeError):
    """Input data violates a documented contract."""


class MalformedRow(DataError):
    """A record row that cannot be parsed into a transaction."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateRecord(DataError):
    """Same tx_hash seen twice with differing field values (strict mode)."""


class ProviderUnavailable(DataError):
    """Label provider cannot be reached at all."""


class PartialResponse(DataError):
    """Label provider answered for only part of the queried addresses."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(
            f"provider failed for {len(self.missing)} address(es): "
            + ", ".join(self.missing[:5])
            + ("..." if len(self.missing) > 5 else "")
        )


class UnknownAddress(DataError):
    """Requested address is not a vertex of the graph."""


class ArityMismatch(DataError):
    """A feature vector or matrix has the wrong width."""


class SingleClassInput(DataError):
    """Training data contains only one label class."""


class InsufficientSamples(DataError):
    """Too few rows to train."""


class CorruptModel(DataError):
    """Model file is truncated, malformed, or has an unsupported version."""


class EmptyDataset(DataError):
    """Metric computation over zero rows."""


class SingleClassDataset(DataError):
    """AUC or a split needs both classes present."""


class ClassTooSmall(DataError):
    """A class cannot contribute at least one sample to each split side."""


class SpecInvalid(DataError):
    """Synthetic dataset spec fails validation."""


class ConfigError(DataError):
    """Pipeline config file is malformed or inconsistent."""

"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI:
  ConfigError (and subclasses)  -> 2
  SessionAbort                  -> 4
  any other EpigradError        -> 3
"""


class EpigradError(Exception):
    """Base class for all package errors."""


class ConfigError(EpigradError):
    """Bad configuration: unknown keys, unresolved names, invalid parameters."""


class ValidationError(ConfigError):
    """Inputs reject pre-run validation (size mismatches, empty runs)."""


class IngestionError(ConfigError):
    """Observed-data file is malformed."""


class StateError(EpigradError):
    """A transition produced an out-of-domain state at runtime."""


class ContractError(EpigradError):
    """A library-level precondition was violated by the caller."""


class PartitionError(EpigradError):
    """Archetype predicates failed to partition the population."""


class ProviderError(EpigradError):
    """A behavior provider query failed; retriable up to the retry budget."""


class SessionAbort(EpigradError):
    """A secure protocol session aborted; no partial results were revealed."""

"""Semantic exception hierarchy.

Every guard in the library raises one of these types so that callers can
distinguish bad inputs from numeric trouble without string matching.
"""


class LincoreError(Exception):
    """Base class for all library errors."""


class DomainError(LincoreError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class EvaluationOverflowError(LincoreError, OverflowError):
    """A loss evaluation would overflow float64.

    Raised instead of silently returning ``inf`` so that benchmarks and
    oracles never compare against poisoned values.
    """


class EnumerationLimitError(LincoreError, ValueError):
    """An exact-enumeration guard was exceeded.

    Exact oracles refuse to run approximately: callers must shrink the
    instance, never trust a truncated enumeration.
    """


class BracketSearchError(LincoreError, RuntimeError):
    """The expanding bracket of the 1-D minimizer hit its width cap."""


class TrainingDivergedError(LincoreError, RuntimeError):
    """A training objective exceeded the divergence guard."""


class ConfigError(LincoreError, ValueError):
    """An experiment configuration contains unknown or invalid keys."""

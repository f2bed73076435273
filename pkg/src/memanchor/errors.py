"""Exception hierarchy shared by every module.

The CLI maps each family onto an exit code, so new errors should subclass
the closest existing family instead of ``AnchorError`` directly.
"""


class AnchorError(Exception):
    """Base class for all memanchor errors."""


class ArgumentError(AnchorError, ValueError):
    """A caller passed an invalid argument."""


class SchemaError(AnchorError, ValueError):
    """Input data does not conform to the expected schema."""


class EmptyInputError(SchemaError):
    """The input conversation contains no utterances."""


class ExtractionParseError(AnchorError):
    """A provider completion could not be parsed as a structured document."""

    def __init__(self, message, raw=""):
        super().__init__(message)
        self.raw = raw


class ProviderError(AnchorError):
    """A model provider failed to produce a completion or embedding."""


class TransportError(ProviderError):
    """Network-level failure talking to a remote provider."""

    def __init__(self, message, attempts=0, last_status=None):
        super().__init__(message)
        self.attempts = attempts
        self.last_status = last_status


class FixtureMissingError(ProviderError):
    """The mock provider has no fixture for the requested call."""


class StateError(AnchorError):
    """An operation was called on an object in the wrong lifecycle state."""


class KBVersionError(AnchorError):
    """A knowledge-base directory has an unsupported format version."""


class KBValidationError(AnchorError):
    """A knowledge-base directory has broken cross references."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid knowledge base:\n  " + "\n  ".join(self.problems))


class DegenerateDesignError(ArgumentError):
    """A regression design matrix cannot be fitted."""

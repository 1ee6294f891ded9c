"""Exception types shared across the package.

Everything raised on purpose derives from ResolutionError so callers can
catch library failures without swallowing programming errors.
"""


class ResolutionError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInput(ResolutionError):
    """Input file or payload does not parse."""


class MissingColumn(ResolutionError):
    """Tabular input lacks a required column."""


class DuplicateId(ResolutionError):
    """Two records in one source share a record id."""


class DimensionMismatch(ResolutionError):
    """Vector dimensions disagree where they must match."""


class ProviderUnavailable(ResolutionError):
    """An embedding provider cannot be reached or is not ready."""


class ProtocolError(ResolutionError):
    """A remote provider answered with a malformed or inconsistent payload."""


class CorruptCache(ResolutionError):
    """A cache or index file fails structural or checksum validation."""


class VersionMismatch(ResolutionError):
    """A cache or index file was written by an incompatible format version."""


class EmptyBatch(ResolutionError):
    """An operation that needs at least one vector got none."""


class InvalidWeights(ResolutionError):
    """Field weights are incomplete, out of range, or do not sum to one."""


class UnknownRefId(ResolutionError):
    """A candidate points at a reference id that is not in the reference set."""


class InvalidSpec(ResolutionError):
    """Corpus or noise parameters are out of their documented ranges."""


class MissingQuery(ResolutionError):
    """Evaluation input lacks a candidate set for a query named in the truth."""


class DuplicateQuery(ResolutionError):
    """Evaluation input contains two decisions for the same query id."""


class ConfigError(InvalidSpec):
    """Pipeline configuration is malformed or fails validation.

    A bad config is a bad run specification, so this narrows InvalidSpec;
    callers validating generator parameters and pipeline settings with one
    except clause can catch the parent.
    """


class StageError(ResolutionError):
    """A pipeline stage failed; wraps the original error and names the stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause

"""Exception hierarchy shared by all mhka modules.

Every failure surfaced to callers is an MhkaError subclass so the CLI can
prefix messages by category and tests can assert on the exact kind.
"""


class MhkaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MhkaError, ValueError):
    """Tensor or array shapes are incompatible for the requested operation."""


class ParameterError(MhkaError, ValueError):
    """A numeric hyperparameter is outside its legal range."""


class ContractError(MhkaError, ValueError):
    """An operation was called in a way that violates its contract."""


class LabelError(MhkaError, ValueError):
    """A gold label is outside the legal label set."""


class CorpusError(MhkaError, ValueError):
    """A text corpus is empty or otherwise unusable."""


class EncodingError(MhkaError, ValueError):
    """A token sequence cannot be produced or consumed."""


class ParseError(MhkaError, ValueError):
    """A dataset file line is malformed."""


class DataError(MhkaError, ValueError):
    """A dataset-level constraint is violated (empty split, bad balance)."""


class RelationError(MhkaError, ValueError):
    """A knowledge relation is not one of the nine known dimensions."""


class ConfigError(MhkaError, ValueError):
    """A model or experiment configuration is invalid."""


class TrainingError(MhkaError, RuntimeError):
    """Training failed (for example the loss became non-finite)."""


class CheckpointError(MhkaError, ValueError):
    """A checkpoint file is missing, corrupt, or incompatible."""


class PerturbationError(MhkaError, ValueError):
    """A knowledge perturbation spec cannot be applied to an instance."""

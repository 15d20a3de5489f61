"""Exception hierarchy shared across the package."""


class PlugBlendError(Exception):
    """Base class for all package-specific errors."""


class InvalidLogits(PlugBlendError):
    """Logit vector contains NaN or infinite entries."""


class DegenerateWeights(PlugBlendError):
    """All-zero weights cannot be scaled to a positive target sum."""


class VocabMismatch(PlugBlendError):
    """Token id outside the vocabulary, or providers disagree on vocab size."""


class ProviderUnavailable(PlugBlendError):
    """A remote provider could not be reached or answered with an error."""


class UnknownControlCode(PlugBlendError):
    """Control code not advertised by the attached guide provider."""


class ModelFileInvalid(PlugBlendError):
    """Toy model file failed schema or normalization validation."""


class ContrastSetTooSmall(PlugBlendError):
    """Posterior contrast requires at least two codes."""


class ShapeMismatch(PlugBlendError):
    """Array dimensions disagree with the attached vocabulary size."""


class InvalidPenalty(PlugBlendError):
    """Repetition penalty must be >= 1."""


class InvalidSketch(PlugBlendError):
    """Control sketch violates its range or parameter constraints."""


class InvalidLineIndex(PlugBlendError):
    """Story line index outside [0, N)."""


class InsufficientData(PlugBlendError):
    """Not enough observations for the requested statistic."""


class UnknownLabel(PlugBlendError):
    """Classifier label has no configured lexicon."""

"""Shared domain types and numerically careful probability primitives.

All probability math that involves products runs in log space; exponentiation
happens once, at final normalization. Everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWeights, InvalidLogits

UNK_ID = 0

# Sum-to-one tolerance for probability vectors.
PROB_ATOL = 1e-9


def as_logits(values) -> np.ndarray:
    """Validate and return a finite float64 logit vector."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidLogits(f"expected a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidLogits("logit vector contains NaN or infinite entries")
    return arr


def log_softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Log-probabilities of ``logits / temperature`` with max-subtraction."""
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    x = as_logits(logits) / temperature
    shifted = x - x.max()
    log_z = np.log(np.exp(shifted).sum())
    return shifted - log_z


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Probabilities of ``logits / temperature``; overflow-safe, sums to 1."""
    return np.exp(log_softmax(logits, temperature))


def argmax_tiebreak(values) -> int:
    """Index of the maximum entry; exact ties break toward the lowest index."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("argmax of empty vector")
    return int(np.argmax(arr))


def normalize_weights(raw, target_sum: float) -> list[float]:
    """Scale non-negative weights so they sum to ``target_sum``.

    Proportions are preserved. All-zero input is only valid when the target
    is zero; otherwise there is no proportional answer.
    """
    weights = [float(w) for w in raw]
    if any(w < 0 for w in weights):
        raise ValueError(f"weights must be non-negative, got {weights}")
    if target_sum < 0:
        raise ValueError(f"target_sum must be non-negative, got {target_sum}")
    total = sum(weights)
    if total == 0.0:
        if target_sum == 0.0:
            return [0.0 for _ in weights]
        raise DegenerateWeights("all-zero weights cannot reach a positive target sum")
    factor = target_sum / total
    return [w * factor for w in weights]


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token surfaces; index 0 is reserved for the unknown token."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("vocabulary must be non-empty")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate surfaces")
        object.__setattr__(self, "_ids", {t.casefold(): i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def token_id(self, surface: str) -> int:
        """Id for a surface form, UNK_ID when out of vocabulary."""
        return self._ids.get(surface.casefold(), UNK_ID)

    def tokenize(self, text: str) -> list[int]:
        return [self.token_id(word) for word in text.split()]

    def detokenize(self, token_ids) -> str:
        return " ".join(self.tokens[int(t)] for t in token_ids)


@dataclass(frozen=True)
class ControlConfig:
    """Per-generation control codes with their strength shares.

    ``entries`` maps each code label to its strength share; after
    :meth:`normalized` the shares sum to ``total_strength``. An empty config
    means uncontrolled generation.
    """

    entries: tuple[tuple[str, float], ...] = ()
    total_strength: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple((str(c), float(w)) for c, w in self.entries)
        )
        labels = [code for code, _ in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate control codes in config: {labels}")
        if any(not code for code in labels):
            raise ValueError("control code labels must be non-empty")
        if any(w < 0 for _, w in self.entries):
            raise ValueError("control strengths must be non-negative")
        if self.total_strength < 0:
            raise ValueError("total_strength must be non-negative")

    @classmethod
    def build(cls, entries, total_strength: float | None = None) -> "ControlConfig":
        """Build a normalized config; total defaults to the raw strength sum."""
        pairs = tuple((str(c), float(w)) for c, w in entries)
        if total_strength is None:
            total_strength = sum(w for _, w in pairs)
        return cls(pairs, float(total_strength)).normalized()

    @classmethod
    def uncontrolled(cls) -> "ControlConfig":
        return cls((), 0.0)

    @property
    def codes(self) -> list[str]:
        return [code for code, _ in self.entries]

    @property
    def is_uncontrolled(self) -> bool:
        return not self.entries or all(w == 0.0 for _, w in self.entries)

    def normalized(self) -> "ControlConfig":
        """Rescale shares so they sum to ``total_strength``."""
        if not self.entries:
            return self
        raw = [w for _, w in self.entries]
        scaled = normalize_weights(raw, self.total_strength)
        pairs = tuple((code, w) for (code, _), w in zip(self.entries, scaled))
        return ControlConfig(pairs, self.total_strength)

    def scaled(self, multiplier: float) -> "ControlConfig":
        """Multiply every share and the total by ``multiplier``."""
        if multiplier < 0:
            raise ValueError("multiplier must be non-negative")
        pairs = tuple((code, w * multiplier) for code, w in self.entries)
        return ControlConfig(pairs, self.total_strength * multiplier)

    def active_entries(self) -> list[tuple[str, float]]:
        """Entries with strictly positive strength."""
        return [(code, w) for code, w in self.entries if w > 0.0]

    def to_jsonable(self) -> dict:
        return {
            "entries": [[code, w] for code, w in self.entries],
            "total_strength": self.total_strength,
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "ControlConfig":
        entries = tuple((str(c), float(w)) for c, w in payload.get("entries", []))
        return cls(entries, float(payload.get("total_strength", 0.0)))

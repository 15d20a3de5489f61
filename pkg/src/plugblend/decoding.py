"""Blending guided decoder.

Per step: base logits -> repetition penalty -> code posteriors -> blended
distribution -> greedy argmax. The code posterior of a candidate token is a
Bayes update over the contrast set using each code's cumulative sequence
log-likelihood, so the guide's opinion sharpens as the line grows. Blended
scores are renormalized to a proper distribution every step; greedy argmax is
normalization-invariant but the recorded per-step probabilities are not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ControlConfig, argmax_tiebreak, log_softmax, softmax
from .errors import (
    ContrastSetTooSmall,
    InvalidPenalty,
    ShapeMismatch,
    UnknownControlCode,
)
from .providers import (
    BaseProvider,
    GuideProvider,
    attach_check,
    check_context,
    conditional_logprob,
)

SENTENCE_TERMINATORS = ".!?"

HARD_TOKEN_CAP = 128


@dataclass(frozen=True)
class GenerationParams:
    """Knobs for one greedy line decode."""

    max_tokens: int = 32
    repetition_penalty: float = 1.2
    temperature: float = 1.0
    stop_at_sentence: bool = True
    eos_token: int | None = None
    posterior_floor: float = 1e-10
    length_normalize_posterior: bool = False

    def __post_init__(self):
        if not 1 <= self.max_tokens <= HARD_TOKEN_CAP:
            raise ValueError(f"max_tokens must be in [1, {HARD_TOKEN_CAP}]")
        if self.repetition_penalty < 1.0:
            raise InvalidPenalty(f"repetition penalty must be >= 1, got {self.repetition_penalty}")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.posterior_floor <= 0:
            raise ValueError("posterior_floor must be > 0")


@dataclass(frozen=True)
class PosteriorMatrix:
    """Per-code posterior over candidate next tokens.

    ``probs[k, x]`` is P(code_k | candidate x, session history); each token
    column sums to 1 over the contrast set. ``cc_logprobs`` keeps the per-code
    next-token log-probabilities so the caller can update cumulative
    likelihoods without re-querying the guide.
    """

    codes: tuple[str, ...]
    probs: np.ndarray
    cc_logprobs: np.ndarray

    def row(self, code: str) -> np.ndarray:
        try:
            return self.probs[self.codes.index(code)]
        except ValueError:
            raise UnknownControlCode(f"code {code!r} not in contrast set {self.codes}") from None


@dataclass
class DecodingSession:
    """Single-owner incremental state for one guided decode."""

    base: BaseProvider
    guide: GuideProvider | None
    config: ControlConfig
    params: GenerationParams
    context: tuple[int, ...]
    contrast_codes: tuple[str, ...]
    cumulative_loglik: dict[str, float]
    generated: list[int] = field(default_factory=list)

    @property
    def full_context(self) -> tuple[int, ...]:
        return self.context + tuple(self.generated)

    def record(self, token: int, cc_logprobs: np.ndarray | None) -> None:
        """Append a chosen token and fold its per-code likelihoods into the state."""
        self.generated.append(int(token))
        if cc_logprobs is not None:
            for k, code in enumerate(self.contrast_codes):
                self.cumulative_loglik[code] += float(cc_logprobs[k, token])


def make_session(
    base: BaseProvider,
    guide: GuideProvider | None,
    config: ControlConfig,
    prompt_tokens: Sequence[int],
    params: GenerationParams | None = None,
    contrast_codes: Sequence[str] | None = None,
) -> DecodingSession:
    params = params or GenerationParams()
    config = config.normalized()
    attach_check(base, guide)
    context = check_context(prompt_tokens, base.vocab_size)
    if guide is not None:
        contrast = tuple(contrast_codes) if contrast_codes is not None else tuple(guide.codes)
        unknown = [c for c in config.codes if c not in contrast]
        if unknown:
            raise UnknownControlCode(f"config codes {unknown} outside contrast set {contrast}")
    else:
        contrast = ()
        if config.active_entries():
            raise UnknownControlCode("controlled decoding requires a guide provider")
    return DecodingSession(
        base=base,
        guide=guide,
        config=config,
        params=params,
        context=context,
        contrast_codes=contrast,
        cumulative_loglik={c: 0.0 for c in contrast},
    )


def gedi_posterior(session: DecodingSession) -> PosteriorMatrix:
    """Bayes posterior over the contrast set for every candidate next token.

    For code c with prior p_c and cumulative log-likelihood L_c, the
    unnormalized column score of candidate x is
    ``log p_c + L_c + log p_c(x | history)``; columns are normalized over the
    contrast set with max-subtraction.
    """
    if session.guide is None or len(session.contrast_codes) < 2:
        raise ContrastSetTooSmall(
            f"contrast set {session.contrast_codes} has fewer than 2 codes"
        )
    ctx = session.full_context
    cc_logprobs = np.stack(
        [
            log_softmax(session.guide.cc_next_logits(ctx, code))
            for code in session.contrast_codes
        ]
    )
    state = np.array(
        [
            math.log(session.guide.prior(code)) + session.cumulative_loglik[code]
            for code in session.contrast_codes
        ]
    )
    scores = state[:, None] + cc_logprobs
    if session.params.length_normalize_posterior:
        scores = scores / (len(session.generated) + 1)
    shifted = scores - scores.max(axis=0, keepdims=True)
    unnorm = np.exp(shifted)
    probs = unnorm / unnorm.sum(axis=0, keepdims=True)
    return PosteriorMatrix(session.contrast_codes, probs, cc_logprobs)


def _normalize_logscores(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    unnorm = np.exp(shifted)
    return unnorm / unnorm.sum()


def blend_step(
    base_logits: np.ndarray,
    posteriors: PosteriorMatrix | None,
    config: ControlConfig,
    temperature: float = 1.0,
    posterior_floor: float = 1e-10,
) -> np.ndarray:
    """Multi-code blended next-token distribution.

    Multiplies the base distribution by each active code's posterior raised to
    its strength share, then renormalizes. With no active codes this is
    exactly the base softmax.
    """
    active = config.active_entries()
    if not active:
        return softmax(base_logits, temperature)
    if posteriors is None:
        raise UnknownControlCode("active control codes but no posterior matrix")
    if posteriors.probs.shape[1] != len(np.asarray(base_logits)):
        raise ShapeMismatch(
            f"posterior width {posteriors.probs.shape[1]} != vocab {len(np.asarray(base_logits))}"
        )
    scores = log_softmax(base_logits, temperature).copy()
    for code, weight in active:
        scores = scores + weight * np.log(np.maximum(posteriors.row(code), posterior_floor))
    return _normalize_logscores(scores)


def blend_single(
    base_logits: np.ndarray,
    posterior_row: np.ndarray,
    strength: float,
    temperature: float = 1.0,
    posterior_floor: float = 1e-10,
) -> np.ndarray:
    """Single-code guidance: base distribution times one posterior^strength."""
    if strength == 0.0:
        return softmax(base_logits, temperature)
    row = np.asarray(posterior_row, dtype=np.float64)
    if row.shape != np.asarray(base_logits).shape:
        raise ShapeMismatch(f"posterior shape {row.shape} != logits shape")
    scores = log_softmax(base_logits, temperature) + strength * np.log(
        np.maximum(row, posterior_floor)
    )
    return _normalize_logscores(scores)


def apply_repetition_penalty(
    logits: np.ndarray, generated: Sequence[int], penalty: float
) -> np.ndarray:
    """Sign-aware penalty on already-generated tokens.

    Positive logits are divided by the penalty, non-positive ones multiplied,
    so a repeat always becomes less likely regardless of logit sign.
    """
    if penalty < 1.0:
        raise InvalidPenalty(f"repetition penalty must be >= 1, got {penalty}")
    out = np.array(logits, dtype=np.float64, copy=True)
    for token in set(int(t) for t in generated):
        if out[token] > 0:
            out[token] = out[token] / penalty
        else:
            out[token] = out[token] * penalty
    return out


def extract_first_sentence(text: str) -> str:
    """Prefix through the first sentence terminator; whole string if none.

    A terminator counts when followed by end-of-text, whitespace, or another
    terminator ("Really?!" cuts after the "?").
    """
    s = text.strip()
    for i, ch in enumerate(s):
        if ch in SENTENCE_TERMINATORS:
            nxt = s[i + 1] if i + 1 < len(s) else ""
            if nxt == "" or nxt.isspace() or nxt in SENTENCE_TERMINATORS:
                return s[: i + 1]
    return s


def _ends_sentence(surface: str | None) -> bool:
    return bool(surface) and surface[-1] in SENTENCE_TERMINATORS


@dataclass(frozen=True)
class DecodeResult:
    text: str
    tokens: tuple[int, ...]
    step_probs: tuple[float, ...]
    empty_generation: bool

    def to_jsonable(self) -> dict:
        return {
            "text": self.text,
            "tokens": list(self.tokens),
            "step_probs": list(self.step_probs),
            "empty_generation": self.empty_generation,
        }


def decode_line(
    base: BaseProvider,
    guide: GuideProvider | None,
    config: ControlConfig,
    prompt_tokens: Sequence[int],
    params: GenerationParams | None = None,
    contrast_codes: Sequence[str] | None = None,
) -> DecodeResult:
    """Greedy-decode one line and keep only its first sentence.

    An end-of-sequence token as the very first choice is reported as an empty
    generation, not an error; callers decide how to fall back.
    """
    session = make_session(base, guide, config, prompt_tokens, params, contrast_codes)
    params = session.params
    controlled = bool(session.config.active_entries())
    step_probs: list[float] = []

    for _ in range(params.max_tokens):
        logits = session.base.next_logits(session.full_context)
        if session.generated and params.repetition_penalty > 1.0:
            logits = apply_repetition_penalty(
                logits, session.generated, params.repetition_penalty
            )
        if controlled:
            posteriors = gedi_posterior(session)
            blended = blend_step(
                logits,
                posteriors,
                session.config,
                params.temperature,
                params.posterior_floor,
            )
        else:
            posteriors = None
            blended = softmax(logits, params.temperature)
        chosen = argmax_tiebreak(blended)
        if params.eos_token is not None and chosen == params.eos_token:
            break
        step_probs.append(float(blended[chosen]))
        session.record(chosen, posteriors.cc_logprobs if posteriors is not None else None)
        if params.stop_at_sentence and _ends_sentence(session.base.token_text(chosen)):
            break

    tokens = tuple(session.generated)
    text = extract_first_sentence(session.base.detokenize(tokens)) if tokens else ""
    return DecodeResult(
        text=text,
        tokens=tokens,
        step_probs=tuple(step_probs),
        empty_generation=not tokens,
    )


@dataclass(frozen=True)
class StrengthCandidate:
    multiplier: float
    result: DecodeResult
    base_perplexity: float
    chosen: bool

    def to_jsonable(self) -> dict:
        return {
            "multiplier": self.multiplier,
            "text": self.result.text,
            "base_perplexity": self.base_perplexity,
            "chosen": self.chosen,
        }


def best_of_strengths(
    base: BaseProvider,
    guide: GuideProvider | None,
    config: ControlConfig,
    prompt_tokens: Sequence[int],
    params: GenerationParams | None = None,
    multipliers: Sequence[float] = (1.0,),
) -> tuple[DecodeResult, list[StrengthCandidate]]:
    """Iterative-deepening strength selection.

    Decodes one candidate per strength multiplier and keeps the one whose
    tokens the base LM finds least surprising (lowest conditional perplexity).
    Ties break toward the smallest multiplier.
    """
    if not multipliers:
        raise ValueError("multipliers must be non-empty")
    if any(m < 0 for m in multipliers):
        raise ValueError("multipliers must be non-negative")
    candidates: list[tuple[float, DecodeResult, float]] = []
    for mult in multipliers:
        result = decode_line(base, guide, config.scaled(mult), prompt_tokens, params)
        if result.tokens:
            logprob = conditional_logprob(base, prompt_tokens, result.tokens)
            ppl = math.exp(-logprob / len(result.tokens))
        else:
            ppl = math.inf
        candidates.append((float(mult), result, ppl))
    best_idx = min(range(len(candidates)), key=lambda i: (candidates[i][2], candidates[i][0]))
    report = [
        StrengthCandidate(mult, result, ppl, chosen=(i == best_idx))
        for i, (mult, result, ppl) in enumerate(candidates)
    ]
    return candidates[best_idx][1], report


def incremental_path_logscore(
    base: BaseProvider,
    guide: GuideProvider,
    config: ControlConfig,
    prompt_tokens: Sequence[int],
    path: Sequence[int],
    contrast_codes: Sequence[str] | None = None,
) -> float:
    """Log-score of a forced token path under the incremental blending chain.

    Accumulates, per step, the base log-probability of the forced token plus
    each active code's posterior log-ratio against the pre-step posterior.
    The ratios telescope, so exponentiating and normalizing these scores over
    a full path set reproduces the sequence-level tilted distribution; this is
    the incremental side of the sequence-level consistency check. Repetition
    penalty and temperature are deliberately excluded.
    """
    session = make_session(base, guide, config, prompt_tokens, None, contrast_codes)
    weights = {code: w for code, w in session.config.active_entries()}
    total = 0.0
    for token in path:
        token = int(token)
        state = np.array(
            [
                math.log(session.guide.prior(code)) + session.cumulative_loglik[code]
                for code in session.contrast_codes
            ]
        )
        prev_posterior = _normalize_logscores(state)
        posteriors = gedi_posterior(session)
        base_logp = log_softmax(session.base.next_logits(session.full_context))
        total += float(base_logp[token])
        for k, code in enumerate(session.contrast_codes):
            w = weights.get(code)
            if w:
                total += w * (
                    math.log(posteriors.probs[k, token]) - math.log(prev_posterior[k])
                )
        session.record(token, posteriors.cc_logprobs)
    return total

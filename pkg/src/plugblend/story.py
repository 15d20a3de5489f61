"""Paragraph generation: iterate a line plan with a sliding sentence context.

Line 0 starts from a neutral fallback prompt; later lines see the last few
generated sentences. A line that comes back empty (immediate end-of-sequence)
is retried once from the fallback prompt, mirroring how short-story models
tend to emit end-of-text early.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .core import ControlConfig
from .decoding import (
    DecodeResult,
    GenerationParams,
    StrengthCandidate,
    best_of_strengths,
    decode_line,
)
from .errors import InvalidLineIndex, PlugBlendError, ProviderUnavailable
from .planning import LinePlan
from .providers import BaseProvider, GuideProvider, conditional_logprob


@dataclass(frozen=True)
class PipelineParams:
    fallback_prompt: str = "Recently"
    context_window: int = 2
    generation: GenerationParams = field(default_factory=GenerationParams)
    best_of: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.context_window < 1:
            raise ValueError("context_window must be >= 1")

    def to_jsonable(self) -> dict:
        return {
            "fallback_prompt": self.fallback_prompt,
            "context_window": self.context_window,
            "max_tokens": self.generation.max_tokens,
            "repetition_penalty": self.generation.repetition_penalty,
            "temperature": self.generation.temperature,
            "best_of": list(self.best_of) if self.best_of else None,
        }


@dataclass(frozen=True)
class StoryLine:
    index: int
    text: str
    config: ControlConfig
    base_perplexity: float | None
    used_fallback: bool = False
    degenerate: bool = False
    candidates: tuple[StrengthCandidate, ...] | None = None

    def to_jsonable(self) -> dict:
        out = {
            "n": self.index,
            "text": self.text,
            "config": self.config.to_jsonable(),
            "ppl": self.base_perplexity,
            "used_fallback": self.used_fallback,
            "degenerate": self.degenerate,
        }
        if self.candidates is not None:
            out["candidates"] = [c.to_jsonable() for c in self.candidates]
        return out


@dataclass(frozen=True)
class Story:
    lines: tuple[StoryLine, ...]
    plan: LinePlan
    params: PipelineParams

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    def texts(self) -> list[str]:
        return [line.text for line in self.lines]

    def to_jsonable(self) -> dict:
        return {
            "lines": [line.to_jsonable() for line in self.lines],
            "plan": self.plan.to_jsonable(),
            "params": self.params.to_jsonable(),
        }


class StoryGenerationError(PlugBlendError):
    """Provider failure mid-story; carries the lines generated so far."""

    def __init__(self, message: str, partial: Story):
        super().__init__(message)
        self.partial = partial


def _context_text(previous_texts: Sequence[str], window: int, fallback: str) -> str:
    recent = [t for t in previous_texts[-window:] if t]
    return " ".join(recent) if recent else fallback


def _decode_story_line(
    base: BaseProvider,
    guide: GuideProvider | None,
    config: ControlConfig,
    context_text: str,
    params: PipelineParams,
) -> StoryLine:
    def attempt(ctx: str) -> tuple[DecodeResult, tuple[StrengthCandidate, ...] | None, str]:
        prompt_tokens = base.tokenize(ctx)
        if params.best_of:
            result, report = best_of_strengths(
                base, guide, config, prompt_tokens, params.generation, params.best_of
            )
            return result, tuple(report), ctx
        return decode_line(base, guide, config, prompt_tokens, params.generation), None, ctx

    result, candidates, used_ctx = attempt(context_text)
    used_fallback = False
    if result.empty_generation:
        used_fallback = True
        result, candidates, used_ctx = attempt(params.fallback_prompt)

    if result.tokens:
        ctx_tokens = base.tokenize(used_ctx)
        logprob = conditional_logprob(base, ctx_tokens, result.tokens)
        ppl = math.exp(-logprob / len(result.tokens))
    else:
        ppl = None
    return StoryLine(
        index=-1,
        text=result.text,
        config=config,
        base_perplexity=ppl,
        used_fallback=used_fallback,
        degenerate=result.empty_generation,
        candidates=candidates,
    )


def _with_index(line: StoryLine, index: int) -> StoryLine:
    return StoryLine(
        index=index,
        text=line.text,
        config=line.config,
        base_perplexity=line.base_perplexity,
        used_fallback=line.used_fallback,
        degenerate=line.degenerate,
        candidates=line.candidates,
    )


def stream_story(
    plan: LinePlan,
    base: BaseProvider,
    guide: GuideProvider | None,
    params: PipelineParams | None = None,
):
    """Yield story lines one at a time as they are generated."""
    params = params or PipelineParams()
    lines: list[StoryLine] = []
    for n in range(plan.n_lines):
        context = _context_text(
            [l.text for l in lines], params.context_window, params.fallback_prompt
        )
        try:
            line = _decode_story_line(base, guide, plan[n], context, params)
        except ProviderUnavailable as exc:
            partial = Story(tuple(lines), plan, params)
            raise StoryGenerationError(
                f"provider failed at line {n}: {exc}", partial
            ) from exc
        lines.append(_with_index(line, n))
        yield lines[-1]


def generate_story(
    plan: LinePlan,
    base: BaseProvider,
    guide: GuideProvider | None,
    params: PipelineParams | None = None,
) -> Story:
    """Generate every planned line in order, each seeing the previous sentences."""
    params = params or PipelineParams()
    lines = tuple(stream_story(plan, base, guide, params))
    return Story(lines, plan, params)


def regenerate_line(
    story: Story,
    n: int,
    plan: LinePlan,
    base: BaseProvider,
    guide: GuideProvider | None,
    params: PipelineParams | None = None,
) -> Story:
    """Re-decode line ``n`` against the current plan; other lines are untouched."""
    params = params or story.params
    if not 0 <= n < story.n_lines:
        raise InvalidLineIndex(f"line {n} outside [0, {story.n_lines})")
    if plan.n_lines != story.n_lines:
        raise InvalidLineIndex(
            f"plan has {plan.n_lines} lines but story has {story.n_lines}"
        )
    context = _context_text(
        [l.text for l in story.lines[:n]], params.context_window, params.fallback_prompt
    )
    line = _with_index(_decode_story_line(base, guide, plan[n], context, params), n)
    lines = story.lines[:n] + (line,) + story.lines[n + 1 :]
    return Story(lines, plan, params)

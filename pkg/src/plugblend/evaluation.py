"""Measurement suite: fluency via base-LM perplexity, control fidelity via
latent-walk sweeps ranked with Kendall's tau-a, and the shuffled-order null.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import requests

from .core import ControlConfig
from .decoding import GenerationParams, decode_line
from .errors import InsufficientData, ProviderUnavailable, UnknownLabel
from .providers import BaseProvider, GuideProvider, sequence_logprob

log = logging.getLogger(__name__)

SWEEP_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)


@runtime_checkable
class Classifier(Protocol):
    def classify(self, text: str, labels: Sequence[str]) -> list[float]: ...


def perplexity(base: BaseProvider, tokens: Sequence[int]) -> float:
    """Base-LM perplexity of a token sequence; V for a uniform model."""
    toks = list(tokens)
    if not toks:
        raise InsufficientData("perplexity of empty token list")
    return math.exp(-sequence_logprob(base, toks) / len(toks))


def kendall_tau_a(scores: Sequence[float]) -> float:
    """Rank correlation against the index order; tied pairs count as neither.

    (concordant - discordant) / (n * (n - 1) / 2).
    """
    n = len(scores)
    if n < 2:
        raise InsufficientData(f"tau-a needs at least 2 observations, got {n}")
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            if scores[j] > scores[i]:
                concordant += 1
            elif scores[j] < scores[i]:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def keyword_classify(
    text: str, labels: Sequence[str], lexicons: dict[str, Sequence[str]]
) -> list[float]:
    """Smoothed lexicon-hit scores, normalized to sum 1 over ``labels``."""
    for label in labels:
        if label not in lexicons:
            raise UnknownLabel(f"no lexicon for label {label!r}")
    words = [w for w in text.casefold().split()]
    raw = []
    for label in labels:
        lexicon = {w.casefold() for w in lexicons[label]}
        raw.append(sum(1 for w in words if w in lexicon) + 0.5)
    total = sum(raw)
    return [r / total for r in raw]


class KeywordClassifier:
    """Offline classifier scoring by lexicon word hits."""

    def __init__(self, lexicons: dict[str, Sequence[str]]):
        self.lexicons = {str(k): list(v) for k, v in lexicons.items()}

    def classify(self, text: str, labels: Sequence[str]) -> list[float]:
        return keyword_classify(text, labels, self.lexicons)


def load_lexicons(path: str | Path) -> dict[str, list[str]]:
    payload = json.loads(Path(path).read_text())
    return {str(k): [str(w) for w in v] for k, v in payload.items()}


class RemoteClassifier:
    """Client for the classify protocol: POST /v1/classify {text, labels}."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def classify(self, text: str, labels: Sequence[str]) -> list[float]:
        try:
            resp = requests.post(
                self.endpoint + "/v1/classify",
                json={"text": text, "labels": list(labels)},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"classifier unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnavailable(f"classifier -> {resp.status_code}: {resp.text}")
        return [float(s) for s in resp.json()["scores"]]


@dataclass(frozen=True)
class SweepStep:
    fraction: float
    text: str
    score_c1: float

    def to_jsonable(self) -> dict:
        return {"fraction": self.fraction, "text": self.text, "score_c1": self.score_c1}


@dataclass(frozen=True)
class SweepResult:
    prompt: str
    c1: str
    c2: str
    total_strength: float
    steps: tuple[SweepStep, ...]
    tau_a: float

    def to_jsonable(self) -> dict:
        return {
            "prompt": self.prompt,
            "c1": self.c1,
            "c2": self.c2,
            "total_strength": self.total_strength,
            "steps": [s.to_jsonable() for s in self.steps],
            "tau_a": self.tau_a,
        }


def fidelity_sweep(
    prompt: str,
    c1: str,
    c2: str,
    total_strength: float,
    base: BaseProvider,
    guide: GuideProvider,
    classifier: Classifier,
    params: GenerationParams | None = None,
    fractions: Sequence[float] = SWEEP_FRACTIONS,
) -> SweepResult:
    """Regenerate one line across blend fractions of c1 vs c2 and rank it.

    Fraction f gives c1 strength f * total and c2 the remainder; tau-a
    compares the classifier's c1 scores against the fraction order.
    """
    if c1 == c2:
        raise ValueError(f"sweep codes must differ, got {c1!r} twice")
    prompt_tokens = base.tokenize(prompt)
    steps = []
    for fraction in fractions:
        config = ControlConfig.build(
            [(c1, fraction * total_strength), (c2, (1.0 - fraction) * total_strength)],
            total_strength,
        )
        result = decode_line(base, guide, config, prompt_tokens, params)
        score = classifier.classify(result.text, [c1, c2])[0]
        steps.append(SweepStep(fraction, result.text, score))
    tau = kendall_tau_a([s.score_c1 for s in steps])
    return SweepResult(prompt, c1, c2, total_strength, tuple(steps), tau)


@dataclass(frozen=True)
class HeatmapCell:
    c1: str
    c2: str
    multiplier: float
    mean_tau_a: float
    count: int
    failures: int = 0

    def to_jsonable(self) -> dict:
        return {
            "pair_c1": self.c1,
            "pair_c2": self.c2,
            "multiplier": self.multiplier,
            "mean_tau_a": self.mean_tau_a,
            "n": self.count,
            "failures": self.failures,
        }


def heatmap(
    prompts: Sequence[str],
    code_pairs: Sequence[tuple[str, str]],
    multipliers: Sequence[float],
    base: BaseProvider,
    guide: GuideProvider,
    classifier: Classifier,
    base_strength: float = 1.0,
    params: GenerationParams | None = None,
) -> list[HeatmapCell]:
    """Mean tau-a per (code pair, strength multiplier) over all prompts.

    Per-prompt failures are logged and dropped from the mean.
    """
    if not prompts or not code_pairs or not multipliers:
        raise InsufficientData("heatmap needs prompts, code pairs, and multipliers")
    cells = []
    for c1, c2 in code_pairs:
        for mult in multipliers:
            taus = []
            failures = 0
            for prompt in prompts:
                try:
                    sweep = fidelity_sweep(
                        prompt, c1, c2, mult * base_strength, base, guide, classifier, params
                    )
                    taus.append(sweep.tau_a)
                except (ProviderUnavailable, InsufficientData) as exc:
                    failures += 1
                    log.warning("sweep failed for %r / %s-%s @%sx: %s", prompt, c1, c2, mult, exc)
            mean = sum(taus) / len(taus) if taus else math.nan
            cells.append(HeatmapCell(c1, c2, float(mult), mean, len(taus), failures))
    return cells


def heatmap_csv(cells: Sequence[HeatmapCell]) -> str:
    lines = ["pair_c1,pair_c2,multiplier,mean_tau_a,n"]
    for cell in cells:
        lines.append(
            f"{cell.c1},{cell.c2},{cell.multiplier},{cell.mean_tau_a},{cell.count}"
        )
    return "\n".join(lines) + "\n"


def shuffled_baseline(
    stories: Sequence[Sequence[str]],
    c1: str,
    c2: str,
    classifier: Classifier,
    seed: int = 0,
) -> float:
    """Mean tau-a of seeded order-shuffled stories; the no-control null (~0)."""
    if not stories:
        raise InsufficientData("no stories given")
    rng = random.Random(seed)
    taus = []
    for i, story in enumerate(stories):
        sentences = list(story)
        if len(sentences) < 2:
            raise InsufficientData(f"story #{i} has fewer than 2 sentences")
        rng.shuffle(sentences)
        scores = [classifier.classify(s, [c1, c2])[0] for s in sentences]
        taus.append(kendall_tau_a(scores))
    return sum(taus) / len(taus)


def parse_corpus(text: str) -> list[list[str]]:
    """Plain-text corpus: one story per blank-line-separated block, one
    sentence per line."""
    stories = []
    for block in text.split("\n\n"):
        sentences = [line.strip() for line in block.splitlines() if line.strip()]
        if sentences:
            stories.append(sentences)
    return stories


def load_corpus(path: str | Path) -> list[list[str]]:
    return parse_corpus(Path(path).read_text())

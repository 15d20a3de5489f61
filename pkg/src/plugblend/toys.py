"""Deterministic toy model constructions for offline tests and demos.

The central construction pairs an order-2 jittered base LM with per-code
order-0 guides whose lexicons are disjoint. Guide rows put a fixed multiple
(``own_to_floor``) of the shared floor probability on their own lexicon, so
the code posterior of a lexicon word is a known constant and the posterior of
every neutral word is exactly 1/n_codes. Base rows decay geometrically within
each word group, which spreads blend-flip thresholds across the strength grid
instead of stacking them at one point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Vocabulary
from .providers import CcTableLM, TableLM, make_cc_lm, save_cc_lm, save_table_lm

EOS_TOKEN = "<eos>"
PERIOD_TOKEN = "."


@dataclass(frozen=True)
class ToyConfig:
    seed: int = 0
    codes: tuple[str, ...] = ("Business", "Science", "Sports", "World")
    lexicon_size: int = 6
    n_neutral: int = 4
    # Base LM masses (renormalized jointly); log-prob steps set flip thresholds.
    neutral_mass: float = 0.222
    topic_mass_per_code: float = 0.183
    period_mass: float = 0.0408
    eos_mass: float = 0.003
    neutral_decay: float = 0.9048
    topic_decay: float = 0.8607
    base_jitter: float = 0.05
    # Guide construction: own-lexicon probability as a multiple of the floor.
    own_to_floor: float = 3.0
    guide_decay: float = 0.96
    guide_jitter: float = 0.04


@dataclass(frozen=True)
class ToyBundle:
    config: ToyConfig
    vocab: Vocabulary
    base: TableLM
    guide: CcTableLM
    lexicons: dict[str, list[str]]
    neutral_words: list[str]

    @property
    def eos_id(self) -> int:
        return self.vocab.token_id(EOS_TOKEN)

    def prompts(self, count: int) -> list[str]:
        """Deterministic neutral-word prompts (distinct base contexts)."""
        combos = itertools.chain(
            itertools.product(self.neutral_words, repeat=2),
            itertools.product(self.neutral_words, repeat=3),
        )
        out = [" ".join(c) for c in itertools.islice(combos, count)]
        if len(out) < count:
            raise ValueError(f"cannot build {count} distinct prompts")
        return out

    def lexicon_ids(self, code: str) -> set[int]:
        return {self.vocab.token_id(w) for w in self.lexicons[code]}


def _decayed(n: int, decay: float) -> np.ndarray:
    return decay ** np.arange(n)


def make_topic_toys(config: ToyConfig = ToyConfig()) -> ToyBundle:
    """Build the disjoint-lexicon base/guide pair described in the module docs."""
    codes = config.codes
    lexicons = {c: [f"{c.lower()}{i}" for i in range(config.lexicon_size)] for c in codes}
    neutral = [f"n{i}" for i in range(config.n_neutral)]
    tokens = ["<unk>", EOS_TOKEN, PERIOD_TOKEN, *neutral]
    for c in codes:
        tokens.extend(lexicons[c])
    vocab = Vocabulary(tuple(tokens))
    v = vocab.size

    neutral_ids = np.array([vocab.token_id(w) for w in neutral])
    lexicon_ids = {c: np.array([vocab.token_id(w) for w in lexicons[c]]) for c in codes}
    period_id = vocab.token_id(PERIOD_TOKEN)
    eos_id = vocab.token_id(EOS_TOKEN)

    def base_row(rng: np.random.Generator | None) -> np.ndarray:
        row = np.zeros(v)
        row[neutral_ids] = config.neutral_mass * _decayed(len(neutral), config.neutral_decay)
        for c in codes:
            row[lexicon_ids[c]] = config.topic_mass_per_code * _decayed(
                config.lexicon_size, config.topic_decay
            )
        row[period_id] = config.period_mass
        row[eos_id] = config.eos_mass
        row[0] = config.eos_mass
        if rng is not None:
            jit = rng.uniform(-config.base_jitter, config.base_jitter, v)
            row = row * np.exp(jit)
        return row / row.sum()

    # Context-dependent rows keyed by 1- and 2-token suffixes; jitter is a pure
    # function of (seed, suffix) so repeated builds are bit-identical.
    table: dict[tuple[int, ...], np.ndarray] = {}
    for t1 in range(v):
        table[(t1,)] = base_row(np.random.default_rng((config.seed, 1, t1)))
        for t2 in range(v):
            table[(t1, t2)] = base_row(np.random.default_rng((config.seed, 2, t1, t2)))
    base = TableLM(order=2, vocab=vocab, table=table, backoff=base_row(None))

    guide_tables: dict[str, TableLM] = {}
    for ci, c in enumerate(codes):
        rng = np.random.default_rng((config.seed, 3, ci))
        row = np.ones(v)
        own = config.own_to_floor * _decayed(config.lexicon_size, config.guide_decay)
        own = own * np.exp(rng.uniform(-config.guide_jitter, config.guide_jitter, config.lexicon_size))
        row[lexicon_ids[c]] = own
        row = row / row.sum()
        guide_tables[c] = TableLM(order=0, vocab=vocab, table={}, backoff=row)
    guide = make_cc_lm(guide_tables)

    return ToyBundle(
        config=config,
        vocab=vocab,
        base=base,
        guide=guide,
        lexicons=lexicons,
        neutral_words=neutral,
    )


def write_toy_files(bundle: ToyBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write base/guide/lexicon files consumable by the CLI and server."""
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "base": out / "base_lm.json",
        "guide": out / "guide_lm.json",
        "lexicons": out / "lexicons.json",
    }
    save_table_lm(bundle.base, paths["base"])
    save_cc_lm(bundle.guide, paths["guide"])
    paths["lexicons"].write_text(json.dumps(bundle.lexicons))
    return paths


def make_random_table_lm(
    seed: int, vocab: Vocabulary, order: int, concentration: float = 1.0
) -> TableLM:
    """Random strictly-positive table LM over all suffixes up to ``order``."""
    rng = np.random.default_rng(seed)
    v = vocab.size

    def row() -> np.ndarray:
        x = rng.gamma(concentration, 1.0, v) + 1e-6
        return x / x.sum()

    table: dict[tuple[int, ...], np.ndarray] = {}
    for length in range(1, order + 1):
        for suffix in itertools.product(range(v), repeat=length):
            table[suffix] = row()
    return TableLM(order=order, vocab=vocab, table=table, backoff=row())


def make_random_cc_lm(
    seed: int, vocab: Vocabulary, codes: tuple[str, ...], order: int = 0
) -> CcTableLM:
    tables = {
        c: make_random_table_lm(seed + 1000 + i, vocab, order) for i, c in enumerate(codes)
    }
    return make_cc_lm(tables)

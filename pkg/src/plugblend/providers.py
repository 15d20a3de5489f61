"""Model providers: contracts, a deterministic table LM, and a remote client.

Two provider roles exist. A *base* provider answers next-token logits for a
context. A *guide* provider additionally conditions on a control code and
advertises the codes it supports. The table-backed implementations are
immutable after load and safe for concurrent use; the remote client talks to
any server that speaks the logits protocol (see ``/v1/*`` endpoints below).
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .core import Vocabulary, log_softmax
from .errors import (
    ModelFileInvalid,
    ProviderUnavailable,
    UnknownControlCode,
    VocabMismatch,
)

# Probability floor when converting stored rows to finite logits.
_LOGIT_FLOOR = 1e-300


@runtime_checkable
class BaseProvider(Protocol):
    """Next-token logits for a context; pure in the context.

    Providers unsafe for concurrent calls declare ``concurrent_safe = False``
    and callers that fan out work must serialize them (see
    ``serialize_unsafe``); everything shipped here is safe.
    """

    @property
    def vocab_size(self) -> int: ...

    def next_logits(self, context: Sequence[int]) -> np.ndarray: ...

    def tokenize(self, text: str) -> list[int]: ...

    def detokenize(self, tokens: Sequence[int]) -> str: ...

    def token_text(self, token: int) -> str | None: ...


@runtime_checkable
class GuideProvider(Protocol):
    """Code-conditional next-token logits plus the advertised code list."""

    @property
    def vocab_size(self) -> int: ...

    @property
    def codes(self) -> list[str]: ...

    def prior(self, code: str) -> float: ...

    def cc_next_logits(self, context: Sequence[int], code: str) -> np.ndarray: ...


def check_context(context: Sequence[int], vocab_size: int) -> tuple[int, ...]:
    ctx = tuple(int(t) for t in context)
    for t in ctx:
        if t < 0 or t >= vocab_size:
            raise VocabMismatch(f"token id {t} outside vocabulary of size {vocab_size}")
    return ctx


def concurrent_safe(provider) -> bool:
    """Providers opt out of concurrent use with ``concurrent_safe = False``."""
    return bool(getattr(provider, "concurrent_safe", True))


def serialize_unsafe(lock: "threading.Lock", *providers):
    """Context manager holding ``lock`` iff any provider declared itself serial."""
    import contextlib

    if all(concurrent_safe(p) for p in providers if p is not None):
        return contextlib.nullcontext()
    return lock


@dataclass(frozen=True)
class TableLM:
    """Order-k conditional-table language model over a small vocabulary.

    ``table`` maps context suffixes (length <= order) to probability rows;
    ``backoff`` answers when no stored suffix matches. Lookup walks from the
    longest context suffix down to the empty one.
    """

    order: int
    vocab: Vocabulary
    table: dict[tuple[int, ...], np.ndarray]
    backoff: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_logit_cache", {})

    @property
    def vocab_size(self) -> int:
        return self.vocab.size

    def _row(self, context: tuple[int, ...]) -> np.ndarray:
        longest = min(self.order, len(context))
        for length in range(longest, 0, -1):
            row = self.table.get(context[len(context) - length :])
            if row is not None:
                return row
        return self.table.get((), self.backoff)

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        ctx = check_context(context, self.vocab.size)
        row = self._row(ctx)
        cached = self._logit_cache.get(id(row))
        if cached is None:
            cached = np.log(np.maximum(row, _LOGIT_FLOOR))
            self._logit_cache[id(row)] = cached
        return cached.copy()

    def tokenize(self, text: str) -> list[int]:
        return self.vocab.tokenize(text)

    def detokenize(self, tokens: Sequence[int]) -> str:
        return self.vocab.detokenize(tokens)

    def token_text(self, token: int) -> str | None:
        return self.vocab.tokens[int(token)]


@dataclass(frozen=True)
class CcTableLM:
    """Class-conditional toy guide: one TableLM per control code."""

    tables: dict[str, TableLM]
    priors: dict[str, float]

    def __post_init__(self):
        sizes = {lm.vocab.size for lm in self.tables.values()}
        if len(sizes) != 1:
            raise VocabMismatch(f"per-code tables disagree on vocab size: {sizes}")

    @property
    def vocab_size(self) -> int:
        return next(iter(self.tables.values())).vocab.size

    @property
    def vocab(self) -> Vocabulary:
        return next(iter(self.tables.values())).vocab

    @property
    def codes(self) -> list[str]:
        return sorted(self.tables)

    def prior(self, code: str) -> float:
        self._require(code)
        return self.priors[code]

    def cc_next_logits(self, context: Sequence[int], code: str) -> np.ndarray:
        self._require(code)
        return self.tables[code].next_logits(context)

    def _require(self, code: str) -> None:
        if code not in self.tables:
            raise UnknownControlCode(f"unknown control code {code!r}; have {self.codes}")


def uniform_priors(codes: Sequence[str]) -> dict[str, float]:
    return {c: 1.0 / len(codes) for c in codes}


def make_cc_lm(tables: dict[str, TableLM], priors: dict[str, float] | None = None) -> CcTableLM:
    if priors is None:
        priors = uniform_priors(sorted(tables))
    else:
        missing = set(tables) - set(priors)
        if missing:
            raise ModelFileInvalid(f"priors missing for codes: {sorted(missing)}")
        if any(p <= 0 for p in priors.values()):
            raise ModelFileInvalid("priors must be positive")
        total = sum(priors[c] for c in tables)
        priors = {c: priors[c] / total for c in tables}
    return CcTableLM(dict(tables), priors)


def sequence_logprob(provider: BaseProvider, tokens: Sequence[int]) -> float:
    """Sum of per-step next-token log-probabilities along ``tokens``."""
    toks = check_context(tokens, provider.vocab_size)
    if not toks:
        raise ValueError("sequence_logprob of empty token list")
    total = 0.0
    for t, tok in enumerate(toks):
        logps = log_softmax(provider.next_logits(toks[:t]))
        total += float(logps[tok])
    return total


def conditional_logprob(
    provider: BaseProvider, context: Sequence[int], tokens: Sequence[int]
) -> float:
    """Log-probability of ``tokens`` continuing ``context`` under the base LM."""
    ctx = check_context(context, provider.vocab_size)
    toks = check_context(tokens, provider.vocab_size)
    if not toks:
        raise ValueError("conditional_logprob of empty token list")
    total = 0.0
    for t, tok in enumerate(toks):
        logps = log_softmax(provider.next_logits(ctx + toks[:t]))
        total += float(logps[tok])
    return total


# ---------------------------------------------------------------------------
# Toy model files
# ---------------------------------------------------------------------------


def _parse_row(values, size: int, where: str) -> np.ndarray:
    row = np.asarray(values, dtype=np.float64)
    if row.shape != (size,):
        raise ModelFileInvalid(f"{where}: expected {size} entries, got shape {row.shape}")
    if np.any(row < 0) or not np.all(np.isfinite(row)):
        raise ModelFileInvalid(f"{where}: entries must be finite and non-negative")
    if abs(float(row.sum()) - 1.0) > 1e-9:
        raise ModelFileInvalid(f"{where}: row sums to {row.sum()!r}, expected 1")
    return row


def _table_lm_from_obj(obj: dict, where: str, vocab: Vocabulary | None = None) -> TableLM:
    if "vocab" in obj:
        vocab = Vocabulary(tuple(obj["vocab"]))
    if vocab is None:
        raise ModelFileInvalid(f"{where}: no vocabulary available")
    order = obj.get("order")
    if not isinstance(order, int) or order < 0:
        raise ModelFileInvalid(f"{where}: 'order' must be a non-negative integer")
    if "backoff" not in obj:
        raise ModelFileInvalid(f"{where}: missing 'backoff' row")
    backoff = _parse_row(obj["backoff"], vocab.size, f"{where}.backoff")
    table: dict[tuple[int, ...], np.ndarray] = {}
    for key, values in obj.get("table", {}).items():
        suffix = tuple(int(p) for p in key.split()) if key else ()
        if len(suffix) > order:
            raise ModelFileInvalid(f"{where}.table[{key!r}]: suffix longer than order {order}")
        if any(t < 0 or t >= vocab.size for t in suffix):
            raise ModelFileInvalid(f"{where}.table[{key!r}]: token id outside vocabulary")
        table[suffix] = _parse_row(values, vocab.size, f"{where}.table[{key!r}]")
    return TableLM(order=order, vocab=vocab, table=table, backoff=backoff)


def load_table_lm(path: str | Path) -> TableLM:
    """Load and validate a toy model file; raises ModelFileInvalid with the offending key."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileInvalid(f"{path}: {exc}") from exc
    return _table_lm_from_obj(obj, str(path))


def load_cc_lm(path: str | Path) -> CcTableLM:
    """Load a class-conditional bundle: shared vocab, per-code tables, priors."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileInvalid(f"{path}: {exc}") from exc
    codes = obj.get("codes")
    if not isinstance(codes, dict) or not codes:
        raise ModelFileInvalid(f"{path}: bundle must carry a non-empty 'codes' map")
    shared = Vocabulary(tuple(obj["vocab"])) if "vocab" in obj else None
    tables = {
        str(label): _table_lm_from_obj(sub, f"{path}:codes[{label!r}]", shared)
        for label, sub in codes.items()
    }
    priors = obj.get("priors")
    if priors is not None:
        priors = {str(k): float(v) for k, v in priors.items()}
    return make_cc_lm(tables, priors)


def table_lm_to_jsonable(lm: TableLM, include_vocab: bool = True) -> dict:
    obj: dict = {
        "order": lm.order,
        "backoff": [float(x) for x in lm.backoff],
        "table": {
            " ".join(str(t) for t in suffix): [float(x) for x in row]
            for suffix, row in lm.table.items()
        },
    }
    if include_vocab:
        obj["vocab"] = list(lm.vocab.tokens)
    return obj


def save_table_lm(lm: TableLM, path: str | Path) -> None:
    Path(path).write_text(json.dumps(table_lm_to_jsonable(lm)))


def save_cc_lm(cc: CcTableLM, path: str | Path) -> None:
    obj = {
        "vocab": list(cc.vocab.tokens),
        "codes": {
            label: table_lm_to_jsonable(lm, include_vocab=False)
            for label, lm in cc.tables.items()
        },
        "priors": dict(cc.priors),
    }
    Path(path).write_text(json.dumps(obj))


# ---------------------------------------------------------------------------
# Remote provider
# ---------------------------------------------------------------------------


class RemoteProvider:
    """HTTP client for the logits protocol; fills both provider roles.

    Vocabulary size and code list are fetched once at attach time from
    ``GET /v1/meta`` and assumed constant for the session.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._local = threading.local()
        meta = self._request("GET", "/v1/meta")
        self._vocab_size = int(meta["vocab_size"])
        self._codes = [str(c) for c in meta.get("codes", [])]

    def _session(self) -> requests.Session:
        # requests.Session is not thread-safe; keep one per thread so the
        # provider can honestly declare itself concurrent-safe
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _request(self, method: str, route: str, body: dict | None = None) -> dict:
        url = self.endpoint + route
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session().request(method, url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(0.05 * (attempt + 1))
                continue
            if resp.status_code != 200:
                try:
                    message = resp.json().get("error", resp.text)
                except ValueError:
                    message = resp.text
                raise ProviderUnavailable(f"{url} -> {resp.status_code}: {message}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProviderUnavailable(f"{url}: malformed JSON response") from exc
        raise ProviderUnavailable(f"{url}: {last_exc}")

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    @property
    def codes(self) -> list[str]:
        return list(self._codes)

    def prior(self, code: str) -> float:
        if code not in self._codes:
            raise UnknownControlCode(f"unknown control code {code!r}; have {self._codes}")
        return 1.0 / len(self._codes)

    def _logits(self, context: Sequence[int], code: str | None) -> np.ndarray:
        ctx = check_context(context, self._vocab_size)
        payload = self._request("POST", "/v1/logits", {"context": list(ctx), "code": code})
        logits = np.asarray(payload["logits"], dtype=np.float64)
        if logits.shape != (self._vocab_size,):
            raise VocabMismatch(
                f"server returned {logits.shape[0]} logits, expected {self._vocab_size}"
            )
        return logits

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        return self._logits(context, None)

    def cc_next_logits(self, context: Sequence[int], code: str) -> np.ndarray:
        if code not in self._codes:
            raise UnknownControlCode(f"unknown control code {code!r}; have {self._codes}")
        return self._logits(context, code)

    def tokenize(self, text: str) -> list[int]:
        payload = self._request("POST", "/v1/tokenize", {"text": text})
        return [int(t) for t in payload["tokens"]]

    def detokenize(self, tokens: Sequence[int]) -> str:
        payload = self._request("POST", "/v1/detokenize", {"tokens": [int(t) for t in tokens]})
        return str(payload["text"])

    def token_text(self, token: int) -> str | None:
        return None


def attach_check(base: BaseProvider, guide: GuideProvider | None) -> None:
    """Hard attach-time invariant: base and guide share one vocabulary size."""
    if guide is not None and base.vocab_size != guide.vocab_size:
        raise VocabMismatch(
            f"base vocab size {base.vocab_size} != guide vocab size {guide.vocab_size}"
        )

"""Compile human control sketches into per-line control configurations.

A sketch marks a topic and a line range; its influence over lines is a
Gaussian bump centered on the range midpoint. Sketches are applied in order,
each code's accumulated per-line weights renormalize to sum 1 after every
application, and finally each line's active weights are rescaled to the
configured total strength.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ControlConfig, normalize_weights
from .errors import InvalidSketch, UnknownControlCode

log = logging.getLogger(__name__)

VARIANCE_MODES = ("literal", "proportional")

# Raw weights below this are planning noise, not control intent.
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class ControlSketch:
    code: str
    start: int
    end: int

    def __post_init__(self):
        if not self.code:
            raise InvalidSketch("sketch code must be non-empty")
        if self.start < 0 or self.start > self.end:
            raise InvalidSketch(
                f"sketch range ({self.start}, {self.end}) must satisfy 0 <= start <= end"
            )

    def to_jsonable(self) -> dict:
        return {"code": self.code, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class SketchSet:
    """A full control sketch: line count, ordered sketches, shape parameters."""

    n_lines: int
    sketches: tuple[ControlSketch, ...] = ()
    sigma: float = 1.0
    epsilon: float = 1e-3
    total_strength: float = 1.0
    variance_mode: str = "literal"

    def __post_init__(self):
        object.__setattr__(self, "sketches", tuple(self.sketches))
        if self.n_lines < 1:
            raise InvalidSketch(f"n_lines must be >= 1, got {self.n_lines}")
        if self.sigma <= 0 or self.epsilon <= 0:
            raise InvalidSketch("sigma and epsilon must be > 0")
        if self.total_strength < 0:
            raise InvalidSketch("total_strength must be non-negative")
        if self.variance_mode not in VARIANCE_MODES:
            raise InvalidSketch(f"variance_mode must be one of {VARIANCE_MODES}")
        for i, sketch in enumerate(self.sketches):
            if sketch.end >= self.n_lines:
                raise InvalidSketch(
                    f"sketch #{i} ({sketch.code!r}) ends at {sketch.end}, "
                    f"beyond last line {self.n_lines - 1}"
                )

    @property
    def codes(self) -> list[str]:
        seen: list[str] = []
        for sketch in self.sketches:
            if sketch.code not in seen:
                seen.append(sketch.code)
        return seen

    def to_jsonable(self) -> dict:
        return {
            "n_lines": self.n_lines,
            "sigma": self.sigma,
            "epsilon": self.epsilon,
            "total_strength": self.total_strength,
            "variance_mode": self.variance_mode,
            "sketches": [s.to_jsonable() for s in self.sketches],
        }

    @classmethod
    def from_jsonable(cls, payload: dict, where: str = "sketch set") -> "SketchSet":
        """Build from the sketch-file schema; ranges past the last line clip."""
        if not isinstance(payload, dict):
            raise InvalidSketch(f"{where}: expected a JSON object")
        try:
            n_lines = int(payload["n_lines"])
        except (KeyError, TypeError, ValueError):
            raise InvalidSketch(f"{where}: missing or invalid 'n_lines'") from None
        sketches = []
        for i, item in enumerate(payload.get("sketches", [])):
            try:
                code = str(item["code"])
                start = int(item["start"])
                end = int(item["end"])
            except (KeyError, TypeError, ValueError):
                raise InvalidSketch(f"{where}: sketch #{i} is malformed: {item!r}") from None
            if end >= n_lines:
                log.warning(
                    "%s: sketch #%d (%s) end %d clipped to last line %d",
                    where, i, code, end, n_lines - 1,
                )
                end = n_lines - 1
            try:
                sketches.append(ControlSketch(code, start, end))
            except InvalidSketch as exc:
                raise InvalidSketch(f"{where}: sketch #{i}: {exc}") from None
        try:
            return cls(
                n_lines=n_lines,
                sketches=tuple(sketches),
                sigma=float(payload.get("sigma", 1.0)),
                epsilon=float(payload.get("epsilon", 1e-3)),
                total_strength=float(payload.get("total_strength", 1.0)),
                variance_mode=str(payload.get("variance_mode", "literal")),
            )
        except InvalidSketch as exc:
            raise InvalidSketch(f"{where}: {exc}") from None


def load_sketch_file(path: str | Path) -> SketchSet:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSketch(f"{path}: {exc}") from exc
    return SketchSet.from_jsonable(payload, where=str(path))


def sketch_weight_profile(
    sketch: ControlSketch,
    n_lines: int,
    sigma: float = 1.0,
    epsilon: float = 1e-3,
    variance_mode: str = "literal",
) -> np.ndarray:
    """Raw per-line weights of one sketch: a Gaussian bump peaking at the
    range midpoint.

    The literal mode uses variance sigma / (e - s + epsilon)^2, which narrows
    as the range widens; the proportional mode uses
    sigma * ((e - s + epsilon) / 2)^2, which widens with the range.
    """
    if sketch.end >= n_lines:
        raise InvalidSketch(f"sketch end {sketch.end} beyond last line {n_lines - 1}")
    if sigma <= 0 or epsilon <= 0:
        raise InvalidSketch("sigma and epsilon must be > 0")
    mid = (sketch.start + sketch.end) / 2.0
    span = sketch.end - sketch.start + epsilon
    if variance_mode == "literal":
        variance = sigma / span**2
    elif variance_mode == "proportional":
        variance = sigma * (span / 2.0) ** 2
    else:
        raise InvalidSketch(f"variance_mode must be one of {VARIANCE_MODES}")
    lines = np.arange(n_lines, dtype=np.float64)
    return np.exp(-((lines - mid) ** 2) / (2.0 * variance)) / math.sqrt(
        2.0 * math.pi * variance
    )


@dataclass(frozen=True)
class LinePlan:
    """Planner output: one control config per line plus per-code weight curves."""

    configs: tuple[ControlConfig, ...]
    curves: dict[str, np.ndarray]
    total_strength: float

    @property
    def n_lines(self) -> int:
        return len(self.configs)

    def __getitem__(self, n: int) -> ControlConfig:
        return self.configs[n]

    def to_jsonable(self) -> dict:
        return {
            "n_lines": self.n_lines,
            "total_strength": self.total_strength,
            "lines": [
                {"n": n, "entries": [[c, w] for c, w in cfg.entries]}
                for n, cfg in enumerate(self.configs)
            ],
            "curves": {code: [float(x) for x in curve] for code, curve in self.curves.items()},
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "LinePlan":
        configs = []
        total = float(payload.get("total_strength", 0.0))
        for line in payload.get("lines", []):
            entries = tuple((str(c), float(w)) for c, w in line.get("entries", []))
            configs.append(ControlConfig(entries, total if entries else 0.0))
        curves = {
            str(code): np.asarray(vals, dtype=np.float64)
            for code, vals in payload.get("curves", {}).items()
        }
        return cls(tuple(configs), curves, total)


def compile_plan(sketch_set: SketchSet) -> LinePlan:
    """Apply sketches in order and derive each line's control configuration."""
    n = sketch_set.n_lines
    acc: dict[str, np.ndarray] = {code: np.zeros(n) for code in sketch_set.codes}
    for sketch in sketch_set.sketches:
        acc[sketch.code] += sketch_weight_profile(
            sketch, n, sketch_set.sigma, sketch_set.epsilon, sketch_set.variance_mode
        )
        total = acc[sketch.code].sum()
        if total > 0:
            acc[sketch.code] = acc[sketch.code] / total

    codes = list(acc)
    configs = []
    for line in range(n):
        raw = [acc[c][line] if acc[c][line] >= WEIGHT_FLOOR else 0.0 for c in codes]
        if sum(raw) == 0.0:
            configs.append(ControlConfig.uncontrolled())
            continue
        shares = normalize_weights(raw, sketch_set.total_strength)
        entries = tuple(
            (code, share) for code, share, r in zip(codes, shares, raw) if r > 0.0
        )
        configs.append(ControlConfig(entries, sketch_set.total_strength))
    return LinePlan(tuple(configs), acc, sketch_set.total_strength)


def crossover_index(plan: LinePlan, c1: str, c2: str) -> int | None:
    """Smallest line where c2's planned weight matches or exceeds c1's.

    Lines where both codes carry zero weight are not contested and are
    skipped. Returns None when c2 never catches up.
    """
    for code in (c1, c2):
        if code not in plan.curves:
            raise UnknownControlCode(f"code {code!r} does not appear in the plan")
    a, b = plan.curves[c1], plan.curves[c2]
    for line in range(plan.n_lines):
        if a[line] == 0.0 and b[line] == 0.0:
            continue
        if b[line] >= a[line]:
            return line
    return None

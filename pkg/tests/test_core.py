import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plugblend.core import (
    ControlConfig,
    Vocabulary,
    argmax_tiebreak,
    log_softmax,
    normalize_weights,
    softmax,
)
from plugblend.errors import DegenerateWeights, InvalidLogits

# Rounding keeps logit gaps either exactly zero or large enough to survive
# the round trip through exp(); sub-epsilon gaps collapse into ties there.
finite_logits = st.lists(
    st.floats(min_value=-50, max_value=50, allow_nan=False).map(lambda x: round(x, 6)),
    min_size=1,
    max_size=32,
)


def test_softmax_uniform_on_equal_logits():
    assert softmax([0.0, 0.0, 0.0, 0.0]) == pytest.approx([0.25] * 4, abs=1e-15)


def test_softmax_overflow_safe():
    probs = softmax([1000.0, 0.0])
    assert np.all(np.isfinite(probs))
    assert probs[0] == pytest.approx(1.0, abs=1e-12)
    assert probs[1] == pytest.approx(0.0, abs=1e-12)


def test_softmax_log_odds():
    probs = softmax([math.log(1.0), math.log(3.0)])
    # direct exponentiation oracle: 1/(1+3), 3/(1+3)
    assert probs == pytest.approx([0.25, 0.75], rel=1e-12)


def test_softmax_rejects_non_finite():
    with pytest.raises(InvalidLogits):
        softmax([0.0, float("nan")])
    with pytest.raises(InvalidLogits):
        softmax([0.0, float("inf")])


def test_softmax_rejects_bad_temperature():
    with pytest.raises(ValueError):
        softmax([0.0, 1.0], temperature=0.0)


@given(finite_logits, st.floats(min_value=-100, max_value=100, allow_nan=False))
def test_softmax_shift_invariance(logits, shift):
    a = softmax(logits)
    b = softmax(np.asarray(logits) + shift)
    assert np.max(np.abs(a - b)) < 1e-12


@given(finite_logits)
def test_softmax_sums_to_one_and_preserves_argmax(logits):
    probs = softmax(logits)
    assert probs.sum() == pytest.approx(1.0, abs=1e-9)
    assert argmax_tiebreak(probs) == argmax_tiebreak(logits)


@given(finite_logits, st.floats(min_value=0.05, max_value=20))
def test_log_softmax_matches_softmax(logits, temperature):
    assert np.allclose(np.exp(log_softmax(logits, temperature)), softmax(logits, temperature))


def test_argmax_tiebreak_examples():
    assert argmax_tiebreak([0.1, 0.9, 0.0]) == 1
    assert argmax_tiebreak([0.5, 0.5]) == 0
    assert argmax_tiebreak([-1.0, -1.0, 3.0]) == 2


def test_normalize_weights_examples():
    assert normalize_weights([1.0, 1.0], 2.0) == [1.0, 1.0]
    assert normalize_weights([2.0, 6.0], 1.0) == pytest.approx([0.25, 0.75], abs=1e-15)


def test_normalize_weights_degenerate():
    with pytest.raises(DegenerateWeights):
        normalize_weights([0.0, 0.0], 1.0)
    assert normalize_weights([0.0, 0.0], 0.0) == [0.0, 0.0]


def test_normalize_weights_rejects_negative():
    with pytest.raises(ValueError):
        normalize_weights([-1.0, 2.0], 1.0)


@given(
    st.lists(st.floats(min_value=0.001, max_value=1000), min_size=1, max_size=10),
    st.floats(min_value=0, max_value=100),
)
def test_normalize_weights_hits_target(raw, target):
    scaled = normalize_weights(raw, target)
    assert sum(scaled) == pytest.approx(target, abs=1e-12 * max(1.0, target))


@given(st.lists(st.floats(min_value=0.001, max_value=1000), min_size=1, max_size=10))
def test_normalize_weights_idempotent(raw):
    target = sum(raw)
    once = normalize_weights(raw, target)
    assert normalize_weights(once, target) == once


def test_vocabulary_tokenize_with_unk():
    vocab = Vocabulary(("<unk>", "the", "game"))
    assert vocab.tokenize("The game") == [1, 2]
    assert vocab.tokenize("zzz") == [0]
    assert vocab.detokenize([1, 2]) == "the game"


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(("<unk>", "a", "a"))
    with pytest.raises(ValueError):
        Vocabulary(())


def test_control_config_normalization():
    config = ControlConfig.build([("Sports", 1.0), ("Science", 3.0)], 2.0)
    assert dict(config.entries) == pytest.approx({"Sports": 0.5, "Science": 1.5})
    assert sum(w for _, w in config.entries) == pytest.approx(2.0, abs=1e-9)


def test_control_config_rejects_duplicates_and_negatives():
    with pytest.raises(ValueError):
        ControlConfig((("Sports", 1.0), ("Sports", 2.0)), 3.0)
    with pytest.raises(ValueError):
        ControlConfig((("Sports", -1.0),), 1.0)


def test_control_config_scaled_and_uncontrolled():
    config = ControlConfig.build([("A", 1.0), ("B", 1.0)], 2.0)
    doubled = config.scaled(2.0)
    assert doubled.total_strength == 4.0
    assert dict(doubled.entries) == pytest.approx({"A": 2.0, "B": 2.0})
    zero = config.scaled(0.0)
    assert zero.is_uncontrolled
    assert zero.active_entries() == []
    assert ControlConfig.uncontrolled().is_uncontrolled

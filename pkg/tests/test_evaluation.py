import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plugblend.core import Vocabulary
from plugblend.decoding import GenerationParams
from plugblend.errors import InsufficientData, UnknownLabel
from plugblend.evaluation import (
    KeywordClassifier,
    RemoteClassifier,
    fidelity_sweep,
    heatmap,
    heatmap_csv,
    kendall_tau_a,
    keyword_classify,
    load_corpus,
    parse_corpus,
    perplexity,
    shuffled_baseline,
)
from plugblend.providers import TableLM

VOCAB4 = Vocabulary(("<unk>", "a", "b", "c"))


def toy_gen_params(bundle):
    return GenerationParams(max_tokens=8, repetition_penalty=2.0, eos_token=bundle.eos_id)


# --- perplexity -------------------------------------------------------------


def test_uniform_perplexity_is_vocab_size():
    lm = TableLM(order=0, vocab=VOCAB4, table={}, backoff=np.full(4, 0.25))
    assert perplexity(lm, [1, 2, 3]) == 4.0
    assert perplexity(lm, [2]) == 4.0


def test_deterministic_chain_perplexity_is_one():
    rows = {
        (1,): np.array([0.0, 0.0, 1.0, 0.0]),
        (2,): np.array([0.0, 0.0, 0.0, 1.0]),
    }
    lm = TableLM(order=1, vocab=VOCAB4, table=rows, backoff=np.array([0.0, 1.0, 0.0, 0.0]))
    assert perplexity(lm, [1, 2, 3]) == pytest.approx(1.0, abs=1e-12)


def test_bigram_perplexity_oracle():
    rows = {
        (1,): np.array([0.0, 0.1, 0.6, 0.3]),
        (2,): np.array([0.0, 0.2, 0.2, 0.6]),
    }
    lm = TableLM(order=1, vocab=VOCAB4, table=rows, backoff=np.array([0.1, 0.3, 0.4, 0.2]))
    # hand product: P(a)=0.3, P(b|a)=0.6, P(c|b)=0.6
    expected = (0.3 * 0.6 * 0.6) ** (-1 / 3)
    assert perplexity(lm, [1, 2, 3]) == pytest.approx(expected, rel=1e-9)


def test_perplexity_empty_rejected():
    lm = TableLM(order=0, vocab=VOCAB4, table={}, backoff=np.full(4, 0.25))
    with pytest.raises(InsufficientData):
        perplexity(lm, [])


# --- kendall tau-a ----------------------------------------------------------


def test_tau_a_paper_example():
    assert kendall_tau_a([24, 37, 84, 65, 86]) == pytest.approx(0.8, abs=1e-12)


def test_tau_a_extremes():
    assert kendall_tau_a([1, 2, 3, 4, 5]) == 1.0
    assert kendall_tau_a([5, 4, 3, 2, 1]) == -1.0
    assert kendall_tau_a([7, 7, 7]) == 0.0


def test_tau_a_needs_two():
    with pytest.raises(InsufficientData):
        kendall_tau_a([1.0])


@given(st.lists(st.floats(min_value=-100, max_value=100), min_size=2, max_size=12))
def test_tau_a_bounded(scores):
    assert -1.0 <= kendall_tau_a(scores) <= 1.0


@given(
    st.lists(
        st.floats(min_value=-100, max_value=100), min_size=2, max_size=12, unique=True
    )
)
def test_tau_a_reversal_antisymmetry(scores):
    assert kendall_tau_a(scores[::-1]) == pytest.approx(-kendall_tau_a(scores))


# rounding keeps score gaps large enough that exp() cannot collapse them
@given(
    st.lists(
        st.floats(min_value=-50, max_value=50).map(lambda x: round(x, 6)),
        min_size=2,
        max_size=12,
    )
)
def test_tau_a_monotone_transform_invariance(scores):
    transformed = [math.exp(0.1 * s) + 3 for s in scores]
    assert kendall_tau_a(transformed) == pytest.approx(kendall_tau_a(scores))


# --- keyword classifier -----------------------------------------------------

LEXICONS = {"Sports": ["goal", "team", "match"], "Business": ["bank", "market"]}


def test_keyword_classify_counts_and_smoothing():
    scores = keyword_classify(
        "the team scored a goal in the match", ["Sports", "Business"], LEXICONS
    )
    assert scores == pytest.approx([3.5 / 4.0, 0.5 / 4.0])
    scores = keyword_classify("goal goal BANK", ["Sports", "Business"], LEXICONS)
    assert scores == pytest.approx([2.5 / 4.0, 1.5 / 4.0])


def test_keyword_classify_no_hits_is_uniform():
    assert keyword_classify("nothing topical", ["Sports", "Business"], LEXICONS) == (
        pytest.approx([0.5, 0.5])
    )


def test_keyword_classify_single_label():
    assert keyword_classify("anything", ["Sports"], LEXICONS) == [1.0]


def test_keyword_classify_unknown_label():
    with pytest.raises(UnknownLabel):
        keyword_classify("x", ["Cooking"], LEXICONS)


def test_keyword_classifier_spec_example():
    # 3 hits vs 1 hit -> [0.7, 0.3]
    clf = KeywordClassifier({"A": ["x"], "B": ["y"]})
    assert clf.classify("x x x y", ["A", "B"]) == pytest.approx([0.7, 0.3])


# --- sweeps ------------------------------------------------------------------


def test_fidelity_sweep_toy_is_perfect(bundle, keyword_classifier):
    sweep = fidelity_sweep(
        "n0 n1", "Sports", "Science", 2.0, bundle.base, bundle.guide,
        keyword_classifier, toy_gen_params(bundle),
    )
    assert sweep.tau_a == 1.0
    assert [s.fraction for s in sweep.steps] == [0.0, 0.25, 0.5, 0.75, 1.0]
    scores = [s.score_c1 for s in sweep.steps]
    assert scores == sorted(scores)


def test_fidelity_sweep_zero_strength_all_ties(bundle, keyword_classifier):
    sweep = fidelity_sweep(
        "n0 n1", "Sports", "Science", 0.0, bundle.base, bundle.guide,
        keyword_classifier, toy_gen_params(bundle),
    )
    texts = {s.text for s in sweep.steps}
    assert len(texts) == 1
    assert sweep.tau_a == 0.0


def test_fidelity_sweep_rejects_same_code(bundle, keyword_classifier):
    with pytest.raises(ValueError):
        fidelity_sweep(
            "n0", "Sports", "Sports", 1.0, bundle.base, bundle.guide, keyword_classifier
        )


def test_heatmap_cells_and_zero_multiplier(bundle, keyword_classifier):
    cells = heatmap(
        ["n0 n1"],
        [("Sports", "Science")],
        [0.0],
        bundle.base,
        bundle.guide,
        keyword_classifier,
        params=toy_gen_params(bundle),
    )
    assert len(cells) == 1
    assert cells[0].mean_tau_a == 0.0
    assert cells[0].count == 1


def test_heatmap_shape_and_monotone_multipliers(bundle, keyword_classifier):
    prompts = bundle.prompts(4)
    cells = heatmap(
        prompts,
        [("Sports", "Science"), ("Business", "World")],
        [1.0, 2.0],
        bundle.base,
        bundle.guide,
        keyword_classifier,
        params=toy_gen_params(bundle),
    )
    assert len(cells) == 4
    by_key = {(c.c1, c.multiplier): c.mean_tau_a for c in cells}
    assert by_key[("Sports", 1.0)] <= by_key[("Sports", 2.0)]
    assert by_key[("Business", 1.0)] <= by_key[("Business", 2.0)]
    csv = heatmap_csv(cells)
    assert csv.splitlines()[0] == "pair_c1,pair_c2,multiplier,mean_tau_a,n"
    assert len(csv.splitlines()) == 5


def test_heatmap_rejects_empty_inputs(bundle, keyword_classifier):
    with pytest.raises(InsufficientData):
        heatmap([], [("A", "B")], [1.0], bundle.base, bundle.guide, keyword_classifier)


# --- shuffled baseline --------------------------------------------------------


def test_shuffled_baseline_all_ties_is_zero(keyword_classifier):
    stories = [["n0 n1"] * 5, ["sports0"] * 4]
    assert shuffled_baseline(stories, "Sports", "Science", keyword_classifier, 7) == 0.0


def test_shuffled_baseline_null_is_near_zero(bundle, keyword_classifier):
    rng = np.random.default_rng(123)
    words = bundle.lexicons["Sports"] + bundle.lexicons["Science"] + bundle.neutral_words
    stories = [
        [" ".join(rng.choice(words, size=4)) for _ in range(5)] for _ in range(200)
    ]
    mean = shuffled_baseline(stories, "Sports", "Science", keyword_classifier, seed=42)
    assert abs(mean) < 0.1


def test_shuffled_baseline_deterministic(bundle, keyword_classifier):
    stories = [["sports0 n0", "science0 n1", "n2", "sports1 sports2"]] * 3
    a = shuffled_baseline(stories, "Sports", "Science", keyword_classifier, seed=5)
    b = shuffled_baseline(stories, "Sports", "Science", keyword_classifier, seed=5)
    assert a == b


def test_shuffled_baseline_short_story_rejected(keyword_classifier):
    with pytest.raises(InsufficientData):
        shuffled_baseline([["only one"]], "Sports", "Science", keyword_classifier, 0)


# --- corpus ------------------------------------------------------------------


def test_parse_corpus_blocks():
    text = "one. \ntwo.\n\nthree.\nfour.\nfive.\n\n\n"
    stories = parse_corpus(text)
    assert stories == [["one.", "two."], ["three.", "four.", "five."]]


def test_load_corpus(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("a b .\nc d .\n\ne f .\ng h .")
    assert len(load_corpus(path)) == 2


# --- remote classifier --------------------------------------------------------


def test_remote_classifier(provider_server, bundle, keyword_classifier):
    remote = RemoteClassifier(provider_server)
    local = keyword_classifier.classify("sports0 n0", ["Sports", "Science"])
    assert remote.classify("sports0 n0", ["Sports", "Science"]) == pytest.approx(local)


def test_remote_classifier_unreachable():
    from plugblend.errors import ProviderUnavailable

    clf = RemoteClassifier("http://127.0.0.1:9", timeout=0.2)
    with pytest.raises(ProviderUnavailable):
        clf.classify("x", ["A", "B"])

"""Plug-and-blend guided decoding: steer any next-token LM toward multiple
continuously weighted topic codes, plan per-line control from human sketches,
and measure fluency and control fidelity."""

from .core import ControlConfig, Vocabulary, argmax_tiebreak, normalize_weights, softmax
from .decoding import (
    DecodeResult,
    GenerationParams,
    apply_repetition_penalty,
    best_of_strengths,
    blend_single,
    blend_step,
    decode_line,
    extract_first_sentence,
    gedi_posterior,
    make_session,
)
from .evaluation import (
    KeywordClassifier,
    RemoteClassifier,
    fidelity_sweep,
    heatmap,
    kendall_tau_a,
    keyword_classify,
    perplexity,
    shuffled_baseline,
)
from .planning import (
    ControlSketch,
    LinePlan,
    SketchSet,
    compile_plan,
    crossover_index,
    load_sketch_file,
    sketch_weight_profile,
)
from .providers import (
    CcTableLM,
    RemoteProvider,
    TableLM,
    load_cc_lm,
    load_table_lm,
    sequence_logprob,
)
from .story import PipelineParams, Story, generate_story, regenerate_line
from .toys import ToyConfig, make_topic_toys, write_toy_files

__version__ = "0.1.0"

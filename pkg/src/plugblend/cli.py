"""Command-line interface: plan, generate, sweep, eval-ppl, serve, make-toys.

Provider specs are either a toy-model JSON path or an http(s) URL. Resolution
order is flag > environment variable > config file. All outputs are
machine-readable JSON/CSV; pretty text is rendered from the same data.

Exit codes: 0 success, 1 usage/config error, 2 provider error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import evaluation
from .core import ControlConfig
from .decoding import GenerationParams
from .errors import (
    InsufficientData,
    InvalidSketch,
    ModelFileInvalid,
    PlugBlendError,
    ProviderUnavailable,
    UnknownControlCode,
    UnknownLabel,
    VocabMismatch,
)
from .evaluation import KeywordClassifier, RemoteClassifier, heatmap_csv, load_corpus
from .planning import compile_plan, load_sketch_file
from .providers import (
    RemoteProvider,
    conditional_logprob,
    load_cc_lm,
    load_table_lm,
    serialize_unsafe,
)
from .story import PipelineParams, generate_story
from .toys import ToyConfig, make_topic_toys, write_toy_files

ENV_BASE = "PLUGBLEND_BASE_URL"
ENV_GUIDE = "PLUGBLEND_GUIDE_URL"
ENV_CLASSIFIER = "PLUGBLEND_CLASSIFIER_URL"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROVIDER = 2
EXIT_DATA = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _is_url(spec: str) -> bool:
    return spec.startswith("http://") or spec.startswith("https://")


def _resolve_spec(flag_value, env_var, config, key):
    if flag_value:
        return flag_value
    if os.environ.get(env_var):
        return os.environ[env_var]
    if config and config.get(key):
        return config[key]
    return None


def _load_config_file(path):
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"config file {path}: {exc}") from exc


def _base_provider(spec):
    if spec is None:
        raise UsageError(f"no base provider; pass --base or set {ENV_BASE}")
    return RemoteProvider(spec) if _is_url(spec) else load_table_lm(spec)


def _guide_provider(spec):
    if spec is None:
        raise UsageError(f"no guide provider; pass --guide or set {ENV_GUIDE}")
    return RemoteProvider(spec) if _is_url(spec) else load_cc_lm(spec)


def _classifier(spec):
    if spec is None:
        raise UsageError(f"no classifier; pass --classifier or set {ENV_CLASSIFIER}")
    if _is_url(spec):
        return RemoteClassifier(spec)
    return KeywordClassifier(evaluation.load_lexicons(spec))


def _generation_params(args) -> GenerationParams:
    return GenerationParams(
        max_tokens=args.max_tokens,
        repetition_penalty=args.repetition_penalty,
        temperature=args.temperature,
        stop_at_sentence=not args.no_stop_at_sentence,
        eos_token=args.eos_token,
    )


def _write_out(payload: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(payload)
    else:
        sys.stdout.write(payload if payload.endswith("\n") else payload + "\n")


def _sketch_with_overrides(args):
    sketch = load_sketch_file(args.sketch)
    overrides = {}
    if args.strength is not None:
        overrides["total_strength"] = args.strength
    if args.sigma is not None:
        overrides["sigma"] = args.sigma
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.variance_mode is not None:
        overrides["variance_mode"] = args.variance_mode
    return replace(sketch, **overrides) if overrides else sketch


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError(f"{flag}: empty list")
    return values


def _parse_pairs(text: str) -> list[tuple[str, str]]:
    pairs = []
    for part in text.split(","):
        pieces = part.split(":")
        if len(pieces) != 2 or not pieces[0] or not pieces[1]:
            raise UsageError(f"--pairs: expected c1:c2, got {part!r}")
        if pieces[0] == pieces[1]:
            raise UsageError(f"--pairs: codes must differ, got {part!r}")
        pairs.append((pieces[0], pieces[1]))
    return pairs


def cmd_plan(args) -> int:
    sketch = _sketch_with_overrides(args)
    plan = compile_plan(sketch)
    payload = plan.to_jsonable()
    _write_out(json.dumps(payload, indent=2), args.out)
    codes = list(plan.curves)
    if codes:
        header = "line  " + "  ".join(f"{c:>12}" for c in codes)
        print(header, file=sys.stderr)
        for n in range(plan.n_lines):
            row = "  ".join(f"{plan.curves[c][n]:12.6f}" for c in codes)
            print(f"{n:4d}  {row}", file=sys.stderr)
    return EXIT_OK


def _dominant(config: ControlConfig) -> str:
    active = config.active_entries()
    if not active:
        return "-"
    return max(active, key=lambda e: e[1])[0]


def cmd_generate(args, config_file) -> int:
    sketch = _sketch_with_overrides(args)
    base = _base_provider(_resolve_spec(args.base, ENV_BASE, config_file, "base"))
    guide = _guide_provider(_resolve_spec(args.guide, ENV_GUIDE, config_file, "guide"))
    plan = compile_plan(sketch)
    params = PipelineParams(
        fallback_prompt=args.prompt if args.prompt is not None else "Recently",
        context_window=args.context_window,
        generation=_generation_params(args),
        best_of=tuple(_parse_floats(args.best_of, "--best-of")) if args.best_of else None,
    )
    story = generate_story(plan, base, guide, params)
    _write_out(json.dumps(story.to_jsonable(), indent=2), args.out)
    for line in story.lines:
        print(f"[{_dominant(line.config):>10}] {line.text}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args, config_file) -> int:
    base = _base_provider(_resolve_spec(args.base, ENV_BASE, config_file, "base"))
    guide = _guide_provider(_resolve_spec(args.guide, ENV_GUIDE, config_file, "guide"))
    classifier = _classifier(
        _resolve_spec(args.classifier, ENV_CLASSIFIER, config_file, "classifier")
    )
    stories = load_corpus(args.prompts)
    if not stories:
        raise InsufficientData(f"no prompts found in {args.prompts}")
    prompts = [story[0] for story in stories]
    pairs = _parse_pairs(args.pairs)
    multipliers = _parse_floats(args.multipliers, "--multipliers")
    params = _generation_params(args)

    guard = threading.Lock()

    def run_cell(pair_mult):
        (c1, c2), mult = pair_mult
        with serialize_unsafe(guard, base, guide, classifier):
            return evaluation.heatmap(
                prompts, [(c1, c2)], [mult], base, guide, classifier,
                base_strength=args.strength, params=params,
            )[0]

    work = [(pair, mult) for pair in pairs for mult in multipliers]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(run_cell, work))
    else:
        cells = [run_cell(item) for item in work]
    _write_out(heatmap_csv(cells), args.out)
    if args.plot:
        _render_heatmap(cells, args.plot)
    return EXIT_OK


def _render_heatmap(cells, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pairs = sorted({f"{c.c1}-{c.c2}" for c in cells})
    mults = sorted({c.multiplier for c in cells})
    grid = [[next(c.mean_tau_a for c in cells
                  if f"{c.c1}-{c.c2}" == p and c.multiplier == m) for m in mults]
            for p in pairs]
    fig, ax = plt.subplots(figsize=(1.5 + len(mults), 1 + 0.5 * len(pairs)))
    im = ax.imshow(grid, vmin=-1, vmax=1, cmap="RdYlGn", aspect="auto")
    ax.set_xticks(range(len(mults)), [f"{m}x" for m in mults])
    ax.set_yticks(range(len(pairs)), pairs)
    fig.colorbar(im, label="mean tau-a")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_eval_ppl(args, config_file) -> int:
    base = _base_provider(_resolve_spec(args.base, ENV_BASE, config_file, "base"))
    guide = _guide_provider(_resolve_spec(args.guide, ENV_GUIDE, config_file, "guide"))
    stories = load_corpus(args.corpus)
    if not stories:
        raise InsufficientData(f"no prompts found in {args.corpus}")
    prompts = [story[0] for story in stories]
    codes = [c for c in args.codes.split(",") if c]
    if not codes:
        raise UsageError("--codes: need at least one control code")
    strengths = _parse_floats(args.strengths, "--strengths")
    params = _generation_params(args)

    guard = threading.Lock()

    def line_ppl(prompt: str, mult: float) -> float | None:
        from .decoding import decode_line
        import math

        config = ControlConfig.build([(c, 1.0) for c in codes], args.strength).scaled(mult)
        with serialize_unsafe(guard, base, guide):
            tokens = base.tokenize(prompt)
            result = decode_line(base, guide, config, tokens, params)
            if not result.tokens:
                return None
            logprob = conditional_logprob(base, tokens, result.tokens)
        return math.exp(-logprob / len(result.tokens))

    rows = ["strength,mean_ppl,n"]
    for mult in strengths:
        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                ppls = [p for p in pool.map(lambda pr: line_ppl(pr, mult), prompts) if p]
        else:
            ppls = [p for p in (line_ppl(pr, mult) for pr in prompts) if p]
        if not ppls:
            raise InsufficientData(f"no successful generations at strength {mult}")
        rows.append(f"{mult},{sum(ppls) / len(ppls)},{len(ppls)}")
    _write_out("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def cmd_serve(args, config_file) -> int:
    import uvicorn

    from .server import create_app

    base = _base_provider(_resolve_spec(args.base, ENV_BASE, config_file, "base"))
    guide = _guide_provider(_resolve_spec(args.guide, ENV_GUIDE, config_file, "guide"))
    params = PipelineParams(
        fallback_prompt=args.prompt if args.prompt is not None else "Recently",
        context_window=args.context_window,
        generation=_generation_params(args),
        best_of=tuple(_parse_floats(args.best_of, "--best-of")) if args.best_of else None,
    )
    app = create_app(base, guide, params=params, persist_dir=args.persist)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def cmd_make_toys(args) -> int:
    bundle = make_topic_toys(ToyConfig(seed=args.seed, period_mass=0.047))
    paths = write_toy_files(bundle, args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="plugblend", description=__doc__)
    parser.add_argument("--config", help="JSON config file with base/guide/classifier specs")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_provider_flags(p, classifier=False):
        p.add_argument("--base", help=f"base LM: toy JSON path or URL (env {ENV_BASE})")
        p.add_argument("--guide", help=f"guide LM: toy JSON path or URL (env {ENV_GUIDE})")
        if classifier:
            p.add_argument(
                "--classifier",
                help=f"lexicon JSON path or URL (env {ENV_CLASSIFIER})",
            )

    def add_generation_flags(p):
        p.add_argument("--max-tokens", type=int, default=16)
        p.add_argument("--repetition-penalty", type=float, default=1.2)
        p.add_argument("--temperature", type=float, default=1.0)
        p.add_argument("--no-stop-at-sentence", action="store_true")
        p.add_argument("--eos-token", type=int, default=None)

    def add_sketch_flags(p):
        p.add_argument("--sketch", required=True, help="sketch set JSON file")
        p.add_argument("--strength", type=float, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--variance-mode", choices=["literal", "proportional"], default=None)

    p_plan = sub.add_parser("plan", help="compile a sketch file into a line plan")
    add_sketch_flags(p_plan)
    p_plan.add_argument("--out", default="-")

    p_gen = sub.add_parser("generate", help="plan and generate a story")
    add_sketch_flags(p_gen)
    add_provider_flags(p_gen)
    add_generation_flags(p_gen)
    p_gen.add_argument("--prompt", default=None, help="fallback/initial prompt text")
    p_gen.add_argument("--context-window", type=int, default=2)
    p_gen.add_argument("--best-of", default=None, help="comma-separated strength multipliers")
    p_gen.add_argument("--out", default="-")

    p_sweep = sub.add_parser("sweep", help="latent-walk fidelity sweeps and heatmap CSV")
    add_provider_flags(p_sweep, classifier=True)
    add_generation_flags(p_sweep)
    p_sweep.add_argument("--prompts", required=True, help="corpus file; first sentences are prompts")
    p_sweep.add_argument("--pairs", required=True, help="comma-separated c1:c2 pairs")
    p_sweep.add_argument("--multipliers", default="1", help="comma-separated multipliers")
    p_sweep.add_argument("--strength", type=float, default=1.0, help="1x total strength")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", default="-")
    p_sweep.add_argument("--plot", default=None, help="optional heatmap image path")

    p_ppl = sub.add_parser("eval-ppl", help="mean base-LM perplexity per strength")
    add_provider_flags(p_ppl)
    add_generation_flags(p_ppl)
    p_ppl.add_argument("--corpus", required=True)
    p_ppl.add_argument("--strengths", default="0,0.5,1,1.5,2,3,4")
    p_ppl.add_argument("--codes", default="Sports,Science", help="codes controlled at equal shares")
    p_ppl.add_argument("--strength", type=float, default=1.0, help="1x total strength")
    p_ppl.add_argument("--jobs", type=int, default=1)
    p_ppl.add_argument("--out", default="-")

    p_serve = sub.add_parser("serve", help="run the session API server")
    add_provider_flags(p_serve)
    add_generation_flags(p_serve)
    p_serve.add_argument("--prompt", default=None, help="fallback/initial prompt text")
    p_serve.add_argument("--context-window", type=int, default=2)
    p_serve.add_argument("--best-of", default=None, help="comma-separated strength multipliers")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--persist", default=None, help="directory for session snapshots")

    p_toys = sub.add_parser("make-toys", help="write toy base/guide/lexicon files")
    p_toys.add_argument("--out", default="toy_models")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config_file = _load_config_file(args.config)
        if args.command == "plan":
            return cmd_plan(args)
        if args.command == "generate":
            return cmd_generate(args, config_file)
        if args.command == "sweep":
            return cmd_sweep(args, config_file)
        if args.command == "eval-ppl":
            return cmd_eval_ppl(args, config_file)
        if args.command == "serve":
            return cmd_serve(args, config_file)
        if args.command == "make-toys":
            return cmd_make_toys(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProviderUnavailable, VocabMismatch) as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (
        InvalidSketch,
        ModelFileInvalid,
        InsufficientData,
        UnknownControlCode,
        UnknownLabel,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PlugBlendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

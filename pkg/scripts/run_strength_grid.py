#!/usr/bin/env python3
"""Fluency-vs-control experiment: mean base-LM perplexity of generated lines
across a control-strength grid, on the bundled toys or remote providers.

    python scripts/run_strength_grid.py --out grid.csv --plot grid.png
    PLUGBLEND_BASE_URL=... PLUGBLEND_GUIDE_URL=... python scripts/run_strength_grid.py
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from plugblend.core import ControlConfig
from plugblend.decoding import GenerationParams, decode_line
from plugblend.providers import RemoteProvider, conditional_logprob
from plugblend.toys import make_topic_toys


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", default="0,0.5,1,1.5,2,3,4")
    parser.add_argument("--codes", default="Sports,Science")
    parser.add_argument("--prompts", type=int, default=20)
    parser.add_argument("--max-tokens", type=int, default=8)
    parser.add_argument("--out", default="-")
    parser.add_argument("--plot", default=None)
    args = parser.parse_args()

    base_url = os.environ.get("PLUGBLEND_BASE_URL")
    guide_url = os.environ.get("PLUGBLEND_GUIDE_URL")
    if base_url and guide_url:
        base, guide = RemoteProvider(base_url), RemoteProvider(guide_url)
        prompts = ["Recently"] * 1  # remote models bring their own prompts via stdin
        if not sys.stdin.isatty():
            prompts = [line.strip() for line in sys.stdin if line.strip()]
        eos = None
    else:
        bundle = make_topic_toys()
        base, guide = bundle.base, bundle.guide
        prompts = bundle.prompts(args.prompts)
        eos = bundle.eos_id

    codes = [c for c in args.codes.split(",") if c]
    params = GenerationParams(
        max_tokens=args.max_tokens, repetition_penalty=2.0, eos_token=eos
    )
    grid = [float(x) for x in args.grid.split(",")]

    rows = ["strength,mean_ppl,n"]
    means = []
    for mult in grid:
        config = ControlConfig.build([(c, 1.0) for c in codes], 1.0).scaled(mult)
        ppls = []
        for prompt in prompts:
            tokens = base.tokenize(prompt)
            result = decode_line(base, guide, config, tokens, params)
            if not result.tokens:
                continue
            logprob = conditional_logprob(base, tokens, result.tokens)
            ppls.append(math.exp(-logprob / len(result.tokens)))
        mean = sum(ppls) / len(ppls)
        means.append(mean)
        rows.append(f"{mult},{mean},{len(ppls)}")
        print(f"strength {mult:>4}x: mean ppl {mean:8.4f} over {len(ppls)} lines")

    csv = "\n".join(rows) + "\n"
    if args.out == "-":
        sys.stdout.write(csv)
    else:
        with open(args.out, "w") as fh:
            fh.write(csv)

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots()
        ax.plot(grid, means, marker="o")
        ax.set_xlabel("total control strength (x)")
        ax.set_ylabel("mean base-LM perplexity")
        fig.tight_layout()
        fig.savefig(args.plot)
    return 0


if __name__ == "__main__":
    sys.exit(main())

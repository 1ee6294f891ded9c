#!/usr/bin/env python3
"""Wall-time scaling of the gather stage as the reference set grows.

The packaged benchmark runs on corpora small enough for tests; this script
answers the practical question: at what reference-set size does the forest's
pruning beat the exact scan? For each m it generates a corpus, embeds it
once, then times brute-force, flat, and RP-forest retrieval at fixed k.

    python3 scripts/bench_scaling.py --sizes 2000 5000 10000 --queries 200
"""

from __future__ import annotations

import argparse
import sys

from erhybrid.embedding import HashNgramProvider, embed_records
from erhybrid.evaluation import benchmark, brute_force_gather
from erhybrid.index import batch_gather, build_flat, build_rpforest
from erhybrid.truth import NoiseSpec, generate_corpus


def run_size(m: int, n: int, args: argparse.Namespace) -> list:
    noise = NoiseSpec(typo_rate=args.typo_rate, seed=args.seed)
    refs, queries, truth = generate_corpus(m, n, noise, args.distractors)
    provider = HashNgramProvider(dim=args.dim)
    ref_batch = embed_records(refs, provider)
    query_batch = embed_records(queries, provider)

    flat = build_flat(ref_batch)
    forest = build_rpforest(
        ref_batch, n_trees=args.n_trees, leaf_size=args.leaf_size, seed=args.seed
    )

    def run_brute():
        flat.comparisons.reset()
        return brute_force_gather(flat, query_batch, args.k), flat.comparisons.total

    def run_flat():
        flat.comparisons.reset()
        candidates = batch_gather(flat, query_batch, args.k)
        return candidates, flat.comparisons.total

    def run_forest():
        forest.comparisons.reset()
        candidates = batch_gather(forest, query_batch, args.k, budget=args.budget)
        return candidates, forest.comparisons.total

    fns = {"bruteforce": run_brute, "flat": run_flat, "rpforest": run_forest}
    return benchmark(fns, truth, args.k, repetitions=args.reps)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[2000, 5000, 10000],
                        help="reference-set sizes to sweep")
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--dim", type=int, default=768)
    parser.add_argument("--typo-rate", type=float, default=0.5)
    parser.add_argument("--distractors", type=float, default=0.1)
    parser.add_argument("--n-trees", type=int, default=16)
    parser.add_argument("--leaf-size", type=int, default=32)
    parser.add_argument("--budget", type=int, default=None,
                        help="forest candidate budget per query (default 10*k or n_trees*leaf_size)")
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    header = f"{'m':>7} {'method':<10} {'recall':>8} {'comparisons':>12} {'wall_ms':>9} {'ratio':>7}"
    print(header)
    print("-" * len(header))
    for m in args.sizes:
        if args.queries > m:
            print(f"skipping m={m}: fewer refs than queries", file=sys.stderr)
            continue
        for row in run_size(m, args.queries, args):
            print(
                f"{m:>7} {row.method:<10} {row.recall:>8.4f} "
                f"{row.comparisons:>12} {row.wall_ms:>9.2f} {row.time_ratio:>7.2f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())

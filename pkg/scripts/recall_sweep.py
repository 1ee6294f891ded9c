#!/usr/bin/env python3
"""Recall@K table across retrieval methods, plus a forest tree-count sweep.

Prints recall at each K for brute-force, flat, and RP-forest retrieval on
one seeded corpus, then shows how forest recall moves with n_trees at a
fixed candidate budget. Useful for picking n_trees/budget before a run.

    python3 scripts/recall_sweep.py --refs 2000 --queries 500 --trees 2 4 8 16
"""

from __future__ import annotations

import argparse
import sys

from erhybrid.embedding import HashNgramProvider, embed_records
from erhybrid.evaluation import brute_force_gather, recall_at_k
from erhybrid.index import batch_gather, build_flat, build_rpforest
from erhybrid.truth import NoiseSpec, generate_corpus


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--refs", type=int, default=2000)
    parser.add_argument("--queries", type=int, default=500)
    parser.add_argument("--k-values", type=int, nargs="+", default=[1, 5, 10, 20])
    parser.add_argument("--trees", type=int, nargs="+", default=[2, 4, 8, 16])
    parser.add_argument("--leaf-size", type=int, default=32)
    parser.add_argument("--budget", type=int, default=512)
    parser.add_argument("--dim", type=int, default=768)
    parser.add_argument("--typo-rate", type=float, default=1.0)
    parser.add_argument("--drop-rate", type=float, default=0.1)
    parser.add_argument("--distractors", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    noise = NoiseSpec(
        typo_rate=args.typo_rate, field_drop_rate=args.drop_rate, seed=args.seed
    )
    refs, queries, truth = generate_corpus(
        args.refs, args.queries, noise, args.distractors
    )
    provider = HashNgramProvider(dim=args.dim)
    ref_batch = embed_records(refs, provider)
    query_batch = embed_records(queries, provider)
    max_k = max(args.k_values)

    flat = build_flat(ref_batch)
    rows = [
        ("bruteforce", brute_force_gather(flat, query_batch, max_k)),
        ("flat", batch_gather(flat, query_batch, max_k)),
    ]
    for trees in args.trees:
        forest = build_rpforest(
            ref_batch, n_trees=trees, leaf_size=args.leaf_size, seed=args.seed
        )
        candidates = batch_gather(forest, query_batch, max_k, budget=args.budget)
        rows.append((f"rpforest({trees})", candidates))

    header = f"{'method':<14}" + "".join(f" recall@{k:<4}" for k in args.k_values)
    print(header)
    print("-" * len(header))
    for name, candidates in rows:
        cells = "".join(
            f" {recall_at_k(candidates, truth, k):>10.4f}" for k in args.k_values
        )
        print(f"{name:<14}{cells}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry points.

Subcommands mirror the pipeline stages: generate a corpus, embed records,
compute ground truth, resolve queries, and evaluate or benchmark retrieval.
Stage progress goes to stderr as one JSON object per line; stdout carries a
short human summary. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, ResolutionError, StageError
from .evaluation import emit_report
from .pipeline import (
    embed_with_cache,
    load_records,
    make_provider,
    run_bench,
    run_eval_retrieval,
    run_ground_truth,
    run_resolve,
)
from .records import Source, serialize, write_csv
from .truth import NoiseSpec, generate_corpus, write_truth


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the CLI contract wants 1.
    def error(self, message):
        raise _UsageError(message)


def _log(event: dict) -> None:
    print(json.dumps(event), file=sys.stderr)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _method_list(text: str) -> list[str]:
    methods = [part.strip() for part in text.split(",") if part.strip()]
    if not methods:
        raise argparse.ArgumentTypeError("expected at least one method")
    return methods


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="TOML config file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--threads", type=int, help="worker threads (0 = one per cpu)")
    common.add_argument("--out", metavar="PATH", help="output directory or report file")
    return common


def _model_flags() -> argparse.ArgumentParser:
    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--embedder", choices=("hash", "tfidf", "remote"))
    model.add_argument("--dim", type=int, help="embedding dimension")
    model.add_argument("--ngram-n", type=int, help="n-gram length for the hash embedder")
    model.add_argument("--index", choices=("flat", "rpforest"))
    model.add_argument("--n-trees", type=int, help="trees in the forest index")
    model.add_argument("--leaf-size", type=int, help="max records per leaf")
    model.add_argument("--search-budget", type=int, help="candidate pool cap per query")
    model.add_argument("--cache-dir", metavar="DIR", help="embedding cache directory")
    model.add_argument("--remote-endpoint", metavar="URL", help="embedding service base URL")
    return model


def build_parser() -> _Parser:
    parser = _Parser(prog="erhybrid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common, model = _common_flags(), _model_flags()

    p = sub.add_parser("generate", parents=[common], help="write a synthetic corpus")
    p.add_argument("--m", type=int, required=True, help="number of reference records")
    p.add_argument("--n", type=int, required=True, help="number of query records")
    p.add_argument("--typo-rate", type=float, default=0.0)
    p.add_argument("--field-drop-rate", type=float, default=0.0)
    p.add_argument("--case-flip-rate", type=float, default=0.0)
    p.add_argument("--swap-adjacent-rate", type=float, default=0.0)
    p.add_argument("--distractor-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("embed", parents=[common, model], help="embed records into a cache")
    p.add_argument("--refs", metavar="FILE", help="reference records (.csv or .jsonl)")
    p.add_argument("--queries", metavar="FILE", help="query records (.csv or .jsonl)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser(
        "ground-truth", parents=[common, model],
        help="pair queries to refs by exact cosine argmax",
    )
    p.add_argument("--refs", metavar="FILE", required=True)
    p.add_argument("--queries", metavar="FILE", required=True)
    p.add_argument("--threshold", type=float, help="min cosine to emit a pair")
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("resolve", parents=[common, model], help="run the full pipeline")
    p.add_argument("--refs", metavar="FILE", required=True)
    p.add_argument("--queries", metavar="FILE", required=True)
    p.add_argument("--truth", metavar="FILE", help="known pairs; enables metrics.json")
    p.add_argument("--k", type=int, help="candidates to gather per query")
    p.add_argument("--accept-threshold", type=float, help="min composite score to accept")
    p.add_argument("--mode", choices=("hybrid", "embedding_only", "allpairs"))
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser(
        "eval-retrieval", parents=[common, model], help="recall@K table per method"
    )
    p.add_argument("--refs", metavar="FILE", required=True)
    p.add_argument("--queries", metavar="FILE", required=True)
    p.add_argument("--truth", metavar="FILE", required=True)
    p.add_argument("--methods", type=_method_list, default=["flat", "rpforest"])
    p.add_argument("--k-list", type=_int_list, default=[1, 5, 10])
    p.set_defaults(func=cmd_eval_retrieval)

    p = sub.add_parser("bench", parents=[common, model], help="wall-time benchmark")
    p.add_argument("--refs", metavar="FILE", required=True)
    p.add_argument("--queries", metavar="FILE", required=True)
    p.add_argument("--truth", metavar="FILE", required=True)
    p.add_argument("--methods", type=_method_list, default=["bruteforce", "flat", "rpforest"])
    p.add_argument("--k", type=int, help="candidates per query while timing")
    p.add_argument("--reps", type=int, default=5, help="timed repetitions per method")
    p.set_defaults(func=cmd_bench)

    return parser


def _base_overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", None),
        "out_dir": getattr(args, "out", None),
        "embedder": getattr(args, "embedder", None),
        "dim": getattr(args, "dim", None),
        "ngram_n": getattr(args, "ngram_n", None),
        "index": getattr(args, "index", None),
        "n_trees": getattr(args, "n_trees", None),
        "leaf_size": getattr(args, "leaf_size", None),
        "search_budget": getattr(args, "search_budget", None),
        "cache_dir": getattr(args, "cache_dir", None),
        "remote_endpoint": getattr(args, "remote_endpoint", None),
        "refs": getattr(args, "refs", None),
        "queries": getattr(args, "queries", None),
        "truth": getattr(args, "truth", None),
        "k": getattr(args, "k", None),
        "accept_threshold": getattr(args, "accept_threshold", None),
        "mode": getattr(args, "mode", None),
    }


def _report_path(out: str | None, default_name: str) -> tuple[Path, str]:
    """--out may be a report file (.csv/.jsonl) or a directory."""
    if out and Path(out).suffix.lower() in (".csv", ".jsonl"):
        path = Path(out)
        fmt = path.suffix.lower().lstrip(".")
    else:
        path = Path(out or "out") / default_name
        fmt = "csv"
    os.makedirs(path.parent, exist_ok=True)
    return path, fmt


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "out_dir": args.out})
    spec = NoiseSpec(
        typo_rate=args.typo_rate,
        field_drop_rate=args.field_drop_rate,
        case_flip_rate=args.case_flip_rate,
        swap_adjacent_rate=args.swap_adjacent_rate,
        seed=cfg.seed,
    )
    refs, queries, truth = generate_corpus(args.m, args.n, spec, args.distractor_rate)
    out = Path(cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    write_csv(refs, out / "refs.csv")
    write_csv(queries, out / "queries.csv")
    write_truth(truth, out / "truth.csv")
    _log(
        {
            "stage": "generate",
            "refs": len(refs),
            "queries": len(queries),
            "truth": len(truth),
            "seed": cfg.seed,
        }
    )
    print(f"wrote {out}/refs.csv, {out}/queries.csv, {out}/truth.csv")
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    if not args.refs and not args.queries:
        raise _UsageError("embed needs --refs and/or --queries")
    overrides = _base_overrides(args)
    # For this subcommand --out names where cache files land.
    overrides["cache_dir"] = args.cache_dir or args.out or "cache"
    cfg = load_config(args.config, overrides)
    ref_records = load_records(args.refs, Source.REFERENCE) if args.refs else []
    if cfg.embedder == "tfidf" and not ref_records:
        raise ConfigError("tfidf embedder needs --refs to fit on")
    provider = make_provider(cfg, [serialize(r) for r in ref_records])
    written = []
    if args.refs:
        batch = embed_with_cache(cfg, ref_records, provider, "refs", _log)
        _log({"stage": "embed", "role": "refs", "count": len(batch), "dim": batch.dim})
        written.append("refs")
    if args.queries:
        query_records = load_records(args.queries, Source.QUERY)
        batch = embed_with_cache(cfg, query_records, provider, "queries", _log)
        _log({"stage": "embed", "role": "queries", "count": len(batch), "dim": batch.dim})
        written.append("queries")
    print(f"cached embeddings for {', '.join(written)} under {cfg.cache_dir}/")
    return 0


def cmd_ground_truth(args: argparse.Namespace) -> int:
    overrides = _base_overrides(args)
    overrides["ground_truth_threshold"] = args.threshold
    overrides["out_dir"] = None  # --out names the truth file or its directory
    cfg = load_config(args.config, overrides)
    if args.out and Path(args.out).suffix.lower() == ".csv":
        out_path = args.out
        os.makedirs(Path(args.out).parent or Path("."), exist_ok=True)
    else:
        out_dir = Path(args.out or cfg.out_dir)
        os.makedirs(out_dir, exist_ok=True)
        out_path = str(out_dir / "truth.csv")
    pairs = run_ground_truth(cfg, out_path, log=_log)
    print(f"wrote {out_path} ({len(pairs)} pairs)")
    return 0


def cmd_resolve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _base_overrides(args))
    result = run_resolve(cfg, log=_log)
    summary = f"{len(result.decisions)} decisions, {result.accepted} accepted"
    if result.metrics is not None:
        summary += (
            f"; precision={result.metrics.precision:.4f}"
            f" recall={result.metrics.recall:.4f} f1={result.metrics.f1:.4f}"
        )
    print(f"wrote {cfg.out_dir}/decisions.jsonl ({summary})")
    return 0


def cmd_eval_retrieval(args: argparse.Namespace) -> int:
    overrides = _base_overrides(args)
    overrides["out_dir"] = None
    cfg = load_config(args.config, overrides)
    rows = run_eval_retrieval(cfg, args.methods, args.k_list, log=_log)
    path, fmt = _report_path(args.out, "retrieval.csv")
    emit_report(rows, path, fmt)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.reps < 1:
        raise _UsageError(f"--reps must be >= 1 (got {args.reps})")
    overrides = _base_overrides(args)
    overrides["out_dir"] = None
    cfg = load_config(args.config, overrides)
    rows = run_bench(cfg, args.methods, repetitions=args.reps, log=_log)
    path, fmt = _report_path(args.out, "bench.csv")
    emit_report(rows, path, fmt)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"erhybrid: usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"erhybrid: usage error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        _log({"error": type(exc.cause).__name__, "stage": exc.stage, "message": str(exc.cause)})
        return 2
    except ResolutionError as exc:
        _log({"error": type(exc).__name__, "message": str(exc)})
        return 2
    except OSError as exc:
        _log({"error": type(exc).__name__, "message": str(exc)})
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands:

    caption        decode captions for a manifest, optionally evaluating
    evaluate       score an existing captions file against a manifest
    gen-synthetic  write a seeded synthetic toy dataset
    keywords parse parse/validate a keyword list file
    serve-toy      expose toy models over the wire protocol
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import GuidecapError
from .files import (
    read_captions,
    read_config_file,
    parse_config_text,
    write_captions,
    write_report_json,
)
from .figures import render_report_figures, write_per_item_csv
from .harness import (
    MODES,
    corpus_from_files,
    per_item_scores,
    resolve_options,
    run_caption,
)
from .keywords import load_keyword_file
from .metrics import evaluate_corpus
from .toy import HashingEmbedder, generate_synthetic_dataset, toy_lm_from_corpus


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key = value run config file")
    parser.add_argument("--backend", help="'toy', 'tcp://host:port', or 'spawn:<command>'")
    parser.add_argument("--mode", choices=MODES, default="full")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a single config key (repeatable)",
    )
    parser.add_argument("--keywords", type=Path, help="keyword list file override")


def _resolved_options(args: argparse.Namespace):
    config_values: dict[str, object] = {}
    base_dir = None
    if args.config:
        config_values = read_config_file(args.config)
        base_dir = args.config.parent
    overrides: dict[str, object] = {}
    for item in args.overrides:
        if "=" not in item:
            raise GuidecapError(f"--set expects KEY=VALUE, got {item!r}")
        parsed = parse_config_text(item)
        overrides.update(parsed)
    if args.backend:
        overrides["backend"] = args.backend
    if args.keywords:
        overrides["keywords_file"] = str(args.keywords.resolve())
    return resolve_options(config_values, base_dir=base_dir, overrides=overrides)


def _write_trace(path: Path, rows, results) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row, result in zip(rows, results):
            steps = []
            for step in result.steps or ():
                steps.append(
                    {
                        "tokens": [int(t) for t in step.tokens],
                        "lm_probs": [float(p) for p in step.lm_probs],
                        "relevancy": None if step.relevancy is None
                        else [float(r) for r in step.relevancy],
                        "combined": None if step.combined is None
                        else [float(c) for c in step.combined],
                        "scored_texts": list(step.scored_texts) if step.scored_texts else None,
                    }
                )
            fh.write(json.dumps({"id": row["id"], "steps": steps}, ensure_ascii=True) + "\n")


def _emit_report(report, corpus, out_path: Path, figures: bool) -> None:
    write_report_json(out_path, report.to_dict())
    print(f"wrote {out_path}")
    rows = per_item_scores(corpus)
    csv_path = out_path.with_suffix(".per_item.csv")
    write_per_item_csv(csv_path, rows)
    print(f"wrote {csv_path}")
    if figures:
        for figure in render_report_figures(report, rows, out_path.parent / "figures"):
            print(f"wrote {figure}")


def _cmd_caption(args: argparse.Namespace) -> int:
    options = _resolved_options(args)
    run = run_caption(
        args.manifest,
        options,
        mode=args.mode,
        workers=args.workers,
        record_steps=args.trace is not None,
    )
    write_captions(args.out, run.rows)
    print(f"wrote {args.out} ({len(run.rows)} captions)")
    if args.trace is not None:
        _write_trace(args.trace, run.rows, run.results)
        print(f"wrote {args.trace}")
    if args.report is not None:
        if run.report is None:
            print("no report: need at least two manifest entries with references",
                  file=sys.stderr)
            return 1
        corpus = corpus_from_files(args.manifest, list(run.rows))
        _emit_report(run.report, corpus, args.report, not args.no_figures)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    rows = read_captions(args.captions)
    corpus = corpus_from_files(args.manifest, rows)
    report = evaluate_corpus(corpus)
    _emit_report(report, corpus, args.out, not args.no_figures)
    return 0


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    dataset = generate_synthetic_dataset(
        args.out, n_clips=args.clips, seed=args.seed, dim=args.dim
    )
    print(f"wrote {dataset.manifest_path} ({args.clips} clips)")
    print(f"wrote {dataset.config_path}")
    return 0


def _cmd_keywords_parse(args: argparse.Namespace) -> int:
    vocab = load_keyword_file(args.input)
    if args.count:
        print(len(vocab))
    else:
        for keyword in vocab.keywords:
            print(keyword)
        print(f"# {len(vocab)} keywords", file=sys.stderr)
    return 0


def _cmd_serve_toy(args: argparse.Namespace) -> int:
    from .protocol import serve_stdio, serve_tcp

    sentences = [
        line for line in Path(args.corpus).read_text("utf-8").splitlines() if line.strip()
    ]
    lm = toy_lm_from_corpus(sentences, order=args.order, alpha=args.alpha)
    scorer = HashingEmbedder(dim=args.dim, seed=args.seed)
    if args.stdio:
        serve_stdio(lm, scorer)
    else:
        def announce(address):
            print(f"listening on tcp://{address[0]}:{address[1]}", file=sys.stderr)

        serve_tcp(lm, scorer, host=args.host, port=args.port, ready_callback=announce)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guidecap")
    sub = parser.add_subparsers(dest="command", required=True)

    p_caption = sub.add_parser("caption", help="decode captions for a manifest")
    p_caption.add_argument("--manifest", type=Path, required=True)
    p_caption.add_argument("--out", type=Path, required=True)
    p_caption.add_argument("--trace", type=Path, help="write per-step trace JSON-lines")
    p_caption.add_argument("--report", type=Path, help="also evaluate and write a metric report")
    p_caption.add_argument("--no-figures", action="store_true")
    _add_run_flags(p_caption)
    p_caption.set_defaults(func=_cmd_caption)

    p_eval = sub.add_parser("evaluate", help="score a captions file against manifest references")
    p_eval.add_argument("--captions", type=Path, required=True)
    p_eval.add_argument("--manifest", type=Path, required=True)
    p_eval.add_argument("--out", type=Path, required=True)
    p_eval.add_argument("--no-figures", action="store_true")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_gen = sub.add_parser("gen-synthetic", help="generate a synthetic toy dataset")
    p_gen.add_argument("--out", type=Path, required=True)
    p_gen.add_argument("--clips", type=int, default=50)
    p_gen.add_argument("--seed", type=int, default=7)
    p_gen.add_argument("--dim", type=int, default=256)
    p_gen.set_defaults(func=_cmd_gen_synthetic)

    p_kw = sub.add_parser("keywords", help="keyword list utilities")
    kw_sub = p_kw.add_subparsers(dest="keywords_command", required=True)
    p_parse = kw_sub.add_parser("parse", help="parse and print a keyword list")
    p_parse.add_argument("--input", type=Path, required=True)
    p_parse.add_argument("--count", action="store_true", help="print only the keyword count")
    p_parse.set_defaults(func=_cmd_keywords_parse)

    p_serve = sub.add_parser("serve-toy", help="serve toy models over the wire protocol")
    p_serve.add_argument("--corpus", type=Path, required=True)
    p_serve.add_argument("--order", type=int, default=2)
    p_serve.add_argument("--alpha", type=float, default=0.1)
    p_serve.add_argument("--dim", type=int, default=64)
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--stdio", action="store_true", help="serve over stdio instead of TCP")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0)
    p_serve.set_defaults(func=_cmd_serve_toy)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GuidecapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""``pva`` command line: prepare, train, evaluate, predict, serve, bench.

Exit codes: 0 ok, 2 usage, 3 data/model problem, 4 training failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .corpus import corpus_stats, load_split
from .errors import BindFailure, DataError, ParseFailure, TrainingError
from .ftclass import FtConfig, train_ft
from .gateway import Request, handle_request, load_routes, make_tcp_server, serve_stdio, serve_tcp
from .linclass import TrainConfig, train_logreg
from .metrics import bench_latency, confusion, item_latency, render_report, report, report_csv
from .modelstore import save_model
from .pipeline import Classifier
from .textproc import build_vocab, load_stopwords, tfidf_vector, tokenize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRAIN = 4

log = logging.getLogger("pva")


def _manifest(args: argparse.Namespace, **extra) -> dict:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}
    return {
        "command": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "data": flags.get("data"),
        "model": flags.get("model") or flags.get("out"),
        "timings_s": extra.pop("timings", {}),
        "metrics": extra.pop("metrics", {}),
        **extra,
    }


def _emit_manifest(manifest: dict, path: Optional[Path]) -> None:
    text = json.dumps(manifest, sort_keys=True, ensure_ascii=False)
    if path is None:
        print(text, file=sys.stderr)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def cmd_prepare(args: argparse.Namespace) -> int:
    stats = {}
    for split in ("train", "test"):
        corpus = load_split(args.data, split, args.strip_headers)
        s = corpus_stats(corpus)
        stats[split] = {"documents": s.total, "classes": len(corpus.label_names)}
        print(f"{split}: {s.total} documents, {len(corpus.label_names)} classes")
        for name, count in s.per_label.items():
            print(f"  {name:<28} {count:>6}")
    _emit_manifest(_manifest(args, metrics=stats), args.manifest)
    return EXIT_OK


def _tokenizer(args: argparse.Namespace):
    stopwords = None
    if args.stopwords_file is not None:
        stopwords = load_stopwords(args.stopwords_file)
    elif args.stopwords:
        stopwords = load_stopwords()
    return stopwords, (lambda text: tokenize(text, stopwords))


def cmd_train(args: argparse.Namespace) -> int:
    timings = {}
    t0 = time.perf_counter()
    corpus = load_split(args.data, "train", args.strip_headers, workers=args.io_workers)
    stopwords, tok = _tokenizer(args)
    docs = [tok(t) for t in corpus.texts]
    labels = corpus.labels
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    vocab, idf = build_vocab(docs, args.min_df, args.max_df, args.max_features)
    extra_config = {"strip_headers": args.strip_headers, "min_df": args.min_df, "max_df": args.max_df,
                    "max_features": args.max_features}
    if stopwords:
        extra_config["stopwords"] = sorted(stopwords)
    try:
        if args.kind == "linear":
            cfg = TrainConfig(
                epochs=20 if args.epochs is None else args.epochs,
                lr0=0.5 if args.lr is None else args.lr,
                l2=args.l2,
                seed=args.seed,
                batch_size=args.batch_size,
            )
            X = [tfidf_vector(d, vocab, idf) for d in docs]
            model = train_logreg(X, labels, cfg, num_features=len(vocab), label_names=corpus.label_names,
                                 vocab_fingerprint=vocab.fingerprint())
        else:
            cfg = FtConfig(
                dim=args.dim,
                epochs=25 if args.epochs is None else args.epochs,
                lr0=0.1 if args.lr is None else args.lr,
                max_n=args.max_n,
                buckets=args.buckets,
                seed=args.seed,
            )
            model = train_ft(docs, labels, vocab, cfg, label_names=corpus.label_names)
    except ValueError as exc:
        raise TrainingError(str(exc)) from exc
    model.config.update(extra_config)
    timings["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    save_model(model, vocab, args.out)
    timings["save"] = time.perf_counter() - t0
    print(f"trained {args.kind} model on {len(docs)} documents, {len(vocab)} vocabulary entries -> {args.out}")
    manifest = _manifest(args, timings=timings, metrics={"documents": len(docs), "vocab_size": len(vocab)})
    _emit_manifest(manifest, args.manifest or Path(str(args.out) + ".manifest.json"))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    classifier = Classifier.from_file(args.model)
    strip = (classifier.model.config or {}).get("strip_headers", False) if args.strip_headers is None \
        else args.strip_headers
    corpus = load_split(args.data, "test", strip, workers=args.io_workers)
    if tuple(corpus.label_names) != tuple(classifier.label_names):
        raise DataError("test split classes do not match the model's label set")

    t0 = time.perf_counter()
    preds = [classifier.predict(t) for t in corpus.texts]
    predict_s = time.perf_counter() - t0
    rep = report(confusion(corpus.labels, preds, len(corpus.label_names)))

    print(render_report(rep), end="")
    print()
    for i, name in enumerate(corpus.label_names):
        print(f"  {i:>2} = {name}")
    metrics = {
        "accuracy": rep.accuracy,
        "macro_f1": rep.macro_avg[2],
        "weighted_precision": rep.weighted_avg[0],
        "weighted_recall": rep.weighted_avg[1],
        "weighted_f1": rep.weighted_avg[2],
        "total_support": rep.total_support,
    }
    latency = {}
    if args.repeats > 0:
        texts = corpus.texts
        whole = bench_latency(classifier.predict, texts, args.warmup, args.repeats)
        single = item_latency(classifier.predict, texts[: args.single_docs], args.warmup)
        latency = {"test_pass": whole.__dict__, "single_document": single.__dict__}
        print(f"\nwhole test-set pass: median {whole.median_ms:.1f} ms, p95 {whole.p95_ms:.1f} ms "
              f"({whole.per_item_ms:.3f} ms/doc over {whole.item_count} docs)")
        print(f"single-document predict: median {single.median_ms:.3f} ms, p95 {single.p95_ms:.3f} ms")

    if args.report:
        out = rep.to_dict(corpus.label_names)
        out["latency"] = latency
        Path(args.report).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(report_csv(rep, corpus.label_names), encoding="utf-8")
    _emit_manifest(_manifest(args, timings={"predict": predict_s}, metrics=metrics), args.manifest)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    classifier = Classifier.from_file(args.model)
    routes = load_routes(args.routes) if args.routes else None
    texts = [args.text] if args.text is not None else [line.rstrip("\r\n") for line in sys.stdin]
    for n, text in enumerate(texts, 1):
        resp = handle_request(Request(id=str(n), text=text), classifier, routes, args.top_k)
        sys.stdout.write(resp.to_line())
    sys.stdout.flush()
    _emit_manifest(_manifest(args, metrics={"records": len(texts)}), args.manifest)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    classifier = Classifier.from_file(args.model)
    routes = load_routes(args.routes)
    if args.listen:
        host, _, port = args.listen.rpartition(":")
        if not port.isdigit():
            print(f"pva serve: --listen expects host:port, got {args.listen!r}", file=sys.stderr)
            return EXIT_USAGE
        server = make_tcp_server(host or "127.0.0.1", int(port), classifier, routes, args.top_k, args.workers)
        log.info("listening on %s:%s", *server.server_address[:2])
        print(f"listening on {server.server_address[0]}:{server.server_address[1]}", file=sys.stderr, flush=True)
        return serve_tcp(server)
    return serve_stdio(classifier, routes, args.top_k, args.workers)


def cmd_bench(args: argparse.Namespace) -> int:
    classifier = Classifier.from_file(args.model)
    corpus = load_split(args.data, args.split, (classifier.model.config or {}).get("strip_headers", False))
    texts = corpus.texts[: args.limit] if args.limit else corpus.texts
    whole = bench_latency(classifier.predict, texts, args.warmup, args.repeats)
    single = item_latency(classifier.predict, texts, args.warmup)
    print(f"{classifier.kind} model, {len(texts)} documents")
    print(f"  pass total: median {whole.median_ms:.1f} ms, p95 {whole.p95_ms:.1f} ms")
    print(f"  per document: median {single.median_ms:.3f} ms, p95 {single.p95_ms:.3f} ms")
    metrics = {"test_pass": whole.__dict__, "single_document": single.__dict__}
    _emit_manifest(_manifest(args, metrics=metrics), args.manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pva", description="Client-request text classification and routing.")
    parser.add_argument("--version", action="version", version=f"pva {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def data_flags(p, required=True):
        p.add_argument("--data", type=Path, required=required, help="20news-bydate root (holds train/ and test/)")
        p.add_argument("--io-workers", type=int, default=1, help="parallel file readers (default 1)")

    def manifest_flag(p):
        p.add_argument("--manifest", type=Path, help="write the run manifest here (JSON)")

    p = sub.add_parser("prepare", help="validate the dataset layout and print class counts")
    data_flags(p)
    p.add_argument("--strip-headers", action="store_true", help="drop everything before the first blank line")
    manifest_flag(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model on the train split and save it")
    data_flags(p)
    p.add_argument("--kind", choices=("linear", "embedding"), default="linear")
    p.add_argument("--out", type=Path, required=True, help="model file to write")
    p.add_argument("--strip-headers", action="store_true", help="drop message headers before tokenizing")
    p.add_argument("--stopwords", action="store_true", help="remove the bundled English stopwords")
    p.add_argument("--stopwords-file", type=Path, help="stopword list, one token per line")
    p.add_argument("--min-df", type=int, default=1)
    p.add_argument("--max-df", type=float, default=1.0, help="max document-frequency ratio")
    p.add_argument("--max-features", type=int)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--epochs", type=int, help="default 20 (linear) / 25 (embedding)")
    p.add_argument("--lr", type=float, help="initial learning rate; default 0.5 (linear) / 0.1 (embedding)")
    p.add_argument("--l2", type=float, default=1e-6, help="linear: L2 penalty")
    p.add_argument("--batch-size", type=int, default=1, help="linear: SGD batch size")
    p.add_argument("--dim", type=int, default=100, help="embedding: vector size")
    p.add_argument("--max-n", type=int, default=2, help="embedding: longest word n-gram")
    p.add_argument("--buckets", type=int, default=1 << 21, help="embedding: n-gram hash buckets")
    manifest_flag(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on the test split")
    data_flags(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--strip-headers", action=argparse.BooleanOptionalAction, default=None,
                   help="override the header setting recorded in the model")
    p.add_argument("--report", type=Path, help="write the report as JSON")
    p.add_argument("--csv", type=Path, help="write per-class rows as CSV")
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--repeats", type=int, default=10, help="timed passes; 0 skips latency measurement")
    p.add_argument("--single-docs", type=int, default=500, help="documents timed one by one")
    manifest_flag(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify --text or each stdin line")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--text", help="text to classify; stdin lines when omitted")
    p.add_argument("--top-k", type=int, default=1)
    p.add_argument("--routes", type=Path, help="route table to annotate responses")
    manifest_flag(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="answer line-delimited JSON requests")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--routes", type=Path, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--listen", metavar="HOST:PORT", help="serve over TCP")
    mode.add_argument("--stdio", action="store_true", help="serve over stdin/stdout (default)")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--workers", type=int, default=1, help="concurrent requests per stream")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="measure prediction latency")
    data_flags(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--limit", type=int, help="only the first N documents")
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--repeats", type=int, default=10)
    manifest_flag(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (DataError, ParseFailure, BindFailure) as exc:
        print(f"pva {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"pva {args.command}: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAIN


if __name__ == "__main__":
    sys.exit(main())

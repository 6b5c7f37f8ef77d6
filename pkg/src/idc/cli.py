"""Command-line entry point: ``idc <subcommand> ...``."""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from . import corpus as corpus_mod
from .apiclient import ProviderError
from .docmodel import METHODS, load_corpus, load_qa, read_segmentations, write_jsonl
from .embedding import APIEmbedder, HashingEmbedder
from .evaluation import EvalReport, compare_methods, evaluate_segmentations, write_figure_data
from .intent import FileGenerator, LLMGenerator, StubGenerator, generate_intents, plan_intent_count
from .pipeline import CachedEmbedder, PipelineConfig, segment_corpus
from .retrieval import Index, build_index, hybrid_search
from .segmenter import SegmenterConfig

logger = logging.getLogger("idc")

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "embedder": "offline",
    "dim": None,
    "generator": "stub",
    "intents_file": None,
    "lam": 0.0005,
    "beta": 0.05,
    "max_len": 12,
    "merge_min_len": 2,
    "split_max_len": 15,
    "window": 6,
    "stride": None,
    "block": 3,
    "k": 10,
    "w_dense": 0.6,
    "dedup_threshold": 0.85,
    "model": None,
    "temperature": 0.8,
    "top_k": 40,
}
_TYPES = {
    "seed": int, "jobs": int, "dim": int, "lam": float, "beta": float, "max_len": int,
    "merge_min_len": int, "split_max_len": int, "window": int, "stride": int, "block": int,
    "k": int, "w_dense": float, "dedup_threshold": float, "temperature": float, "top_k": int,
}
# Config-file spellings that differ from option names.
_ALIASES = {"lambda": "lam", "max-len": "max_len"}


class CLIError(Exception):
    pass


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` comments. API keys are never read from here."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc.strerror}") from None
    parser.read_string("[idc]\n" + text)
    out = {}
    for key, raw in parser["idc"].items():
        key = _ALIASES.get(key, key.replace("-", "_"))
        if key not in DEFAULTS:
            raise CLIError(f"{path}: unknown config key {key!r}")
        out[key] = _TYPES.get(key, str)(raw)
    return out


def resolve(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def make_embedder(s: dict):
    if s["embedder"] == "offline":
        return HashingEmbedder(s["dim"] or 64)
    kwargs = {"dim": s["dim"] or 1536}
    if s["model"]:
        kwargs["model"] = s["model"]
    return APIEmbedder(**kwargs)


def make_generator(s: dict, embedder):
    if s["generator"] == "stub":
        return StubGenerator(embedder)
    if s["generator"] == "file":
        if not s["intents_file"]:
            raise CLIError("--generator file needs --intents-file")
        return FileGenerator(_existing(s["intents_file"]))
    kwargs = {"temperature": s["temperature"], "top_k": s["top_k"], "seed": s["seed"]}
    if s["model"]:
        kwargs["model"] = s["model"]
    return LLMGenerator(**kwargs)


def pipeline_config(s: dict, postprocess: bool = True) -> PipelineConfig:
    seg = SegmenterConfig(
        lam=s["lam"], beta=s["beta"], max_len=s["max_len"],
        merge_min_len=s["merge_min_len"], split_max_len=max(s["split_max_len"], s["max_len"]),
    )
    return PipelineConfig(
        segmenter=seg, window=s["window"], stride=s["stride"], block=s["block"],
        dedup_threshold=s["dedup_threshold"], postprocess=postprocess, jobs=s["jobs"],
    )


def _existing(path: str) -> str:
    if not Path(path).is_file():
        raise CLIError(f"no such file: {path}")
    return path


def cmd_gen_corpus(args, s) -> int:
    docs, qa = corpus_mod.generate_corpus(
        seed=s["seed"], num_docs=args.docs, topics_per_doc=args.topics, num_qa=args.qa_count
    )
    write_jsonl(args.out, docs)
    write_jsonl(args.qa_out, [{"question": p.question, "answer": p.answer, "doc_id": p.doc_id} for p in qa])
    logger.info("wrote %d documents to %s and %d QA pairs to %s", len(docs), args.out, len(qa), args.qa_out)
    return 0


def cmd_intents(args, s) -> int:
    documents = load_corpus(_existing(args.corpus))
    embedder = CachedEmbedder(make_embedder(s))
    generator = make_generator(s, embedder)
    records = []
    for doc in sorted(documents, key=lambda d: d.doc_id):
        if len(doc) == 0:
            logger.warning("%s: empty document, no intents", doc.doc_id)
            continue
        plan = plan_intent_count(len(doc), doc.paragraph_starts)
        for q in generate_intents(generator, doc, plan):
            records.append({"doc_id": doc.doc_id, "question": q})
    write_jsonl(args.out, records)
    logger.info("wrote %d questions to %s", len(records), args.out)
    return 0


def cmd_chunk(args, s) -> int:
    documents = load_corpus(_existing(args.corpus))
    embedder = CachedEmbedder(make_embedder(s))
    generator = make_generator(s, embedder) if args.method == "idc" else None
    results = segment_corpus(documents, args.method, embedder, pipeline_config(s, not args.no_postprocess), generator)
    for r in results:
        logger.info("%s: %d chunks in %.1f ms", r.segmentation.doc_id, len(r.segmentation), 1000 * r.segment_seconds)
    write_jsonl(args.out, [r.segmentation.to_dict() for r in results])
    failed = [r for r in results if r.error is not None]
    if failed:
        for r in failed:
            print(f"fallback: {r.segmentation.doc_id}: {r.error}", file=sys.stderr)
        print(f"{len(failed)} of {len(results)} documents fell back to coherence segmentation", file=sys.stderr)
        return 3
    return 0


def cmd_index(args, s) -> int:
    segs = read_segmentations(_existing(args.segments))
    chunks = [c for seg in sorted(segs, key=lambda x: x.doc_id) for c in seg.chunks]
    index = build_index(chunks, make_embedder(s))
    index.save(args.out)
    logger.info("indexed %d chunks into %s", len(index), args.out)
    return 0


def _check_embedder(index: Index, embedder) -> None:
    info = index.embedder or {}
    if info and (info.get("dim") != embedder.dim or info.get("name") != getattr(embedder, "name", None)):
        raise CLIError(f"index was built with embedder {info}, query embedder is {embedder.name}/{embedder.dim}")


def cmd_query(args, s) -> int:
    index = Index.load(_existing(args.index))
    embedder = make_embedder(s)
    _check_embedder(index, embedder)
    hits = hybrid_search(index, args.query, embedder, k=s["k"], w_dense=s["w_dense"], w_sparse=1 - s["w_dense"])
    out = []
    for h in hits:
        c = index.chunks[h.chunk_index]
        out.append(dict(h.to_dict(), doc_id=c.doc_id, start=c.start, end=c.end, text=c.text))
    print(json.dumps(out, indent=2, ensure_ascii=False))
    return 0


def _write_report(report: EvalReport, out: str, inline_timings: bool) -> None:
    out_path = Path(out)
    out_path.write_text(report.to_json(include_timings=inline_timings), encoding="utf-8")
    out_path.with_suffix(".csv").write_text(report.to_csv(include_timings=inline_timings), encoding="utf-8")
    if not inline_timings:
        timings = out_path.with_name(out_path.stem + ".timings.json")
        timings.write_text(json.dumps(report.timings(), indent=2) + "\n", encoding="utf-8")


def cmd_eval(args, s) -> int:
    segs = read_segmentations(_existing(args.segments))
    qa = load_qa(_existing(args.qa))
    if not qa:
        raise CLIError("no QA pairs")
    methods = sorted({seg.method for seg in segs})
    embedder = CachedEmbedder(make_embedder(s))
    rec = evaluate_segmentations(segs, qa, embedder, "+".join(methods) or "none", s["k"], args.per_document, s["w_dense"])
    report = EvalReport(args.dataset, [rec], {"k": s["k"], "w_dense": s["w_dense"], "per_document": args.per_document})
    _write_report(report, args.out, args.inline_timings)
    print(report.to_csv(include_timings=False), end="")
    return 0


def cmd_compare(args, s) -> int:
    documents = load_corpus(_existing(args.corpus))
    qa = load_qa(_existing(args.qa))
    if not qa:
        raise CLIError("no QA pairs")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise CLIError(f"unknown methods: {', '.join(unknown)}")
    embedder = CachedEmbedder(make_embedder(s))
    generator = make_generator(s, embedder) if "idc" in methods else None
    t0 = time.perf_counter()
    report = compare_methods(
        documents, qa, methods, embedder, generator, pipeline_config(s, not args.no_postprocess),
        dataset=args.dataset, k=s["k"], per_document=args.per_document, w_dense=s["w_dense"],
    )
    report.settings["seed"] = s["seed"]
    logger.info("compared %d methods in %.2fs", len(methods), time.perf_counter() - t0)
    _write_report(report, args.out, args.inline_timings)
    if args.figures_dir:
        write_figure_data([report], args.figures_dir)
    print(report.to_csv(include_timings=False), end="")
    return 0


def _shared(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("shared options (override --config)")
    g.add_argument("--config", help="key = value settings file")
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int, help="documents processed in parallel")
    g.add_argument("--embedder", choices=("offline", "api"))
    g.add_argument("--dim", type=int, help="embedding dimension (offline default 64, api 1536)")
    g.add_argument("--model", help="API model name for the embedder or generator")
    g.add_argument("--generator", choices=("stub", "llm", "file"))
    g.add_argument("--intents-file", dest="intents_file", help="JSONL of {doc_id, question}; implies --generator file")
    g.add_argument("--lambda", dest="lam", type=float, help="length penalty weight")
    g.add_argument("--beta", type=float, help="boundary penalty")
    g.add_argument("--max-len", dest="max_len", type=int, help="longest IDC chunk in sentences")
    g.add_argument("--split-max-len", dest="split_max_len", type=int)
    g.add_argument("--merge-min-len", dest="merge_min_len", type=int)
    g.add_argument("--window", type=int, help="fixed/sliding window in sentences")
    g.add_argument("--stride", type=int, help="sliding stride (default window // 2)")
    g.add_argument("--block", type=int, help="coherence block size")
    g.add_argument("--k", type=int, help="results to retrieve")
    g.add_argument("--w-dense", dest="w_dense", type=float, help="dense weight in fusion (sparse gets 1 - w)")
    g.add_argument("--temperature", type=float)
    g.add_argument("--top-k", dest="top_k", type=int, help="LLM top-k sampling")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idc", description="Intent-driven document chunking and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write a seeded synthetic corpus and QA file")
    p.add_argument("--out", required=True)
    p.add_argument("--qa-out", required=True)
    p.add_argument("--docs", type=int, default=2)
    p.add_argument("--topics", type=int, default=5, help="topics per document")
    p.add_argument("--qa-count", type=int, default=20)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("intents", help="predict questions per document")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_intents)

    p = sub.add_parser("chunk", help="segment a corpus")
    p.add_argument("corpus")
    p.add_argument("--method", choices=METHODS, default="idc")
    p.add_argument("--out", required=True)
    p.add_argument("--no-postprocess", action="store_true")
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("index", help="build a retrieval index from segmentation JSONL")
    p.add_argument("segments")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="search an index")
    p.add_argument("index")
    p.add_argument("query")
    p.set_defaults(func=cmd_query)

    for name, helptext in (("eval", "score one segmentation file"), ("compare", "run several methods end to end")):
        p = sub.add_parser(name, help=helptext)
        if name == "eval":
            p.add_argument("segments")
        else:
            p.add_argument("corpus")
            p.add_argument("--methods", default=",".join(METHODS))
            p.add_argument("--no-postprocess", action="store_true")
            p.add_argument("--figures-dir", help="write per-figure CSV series here")
        p.add_argument("--qa", required=True)
        p.add_argument("--out", required=True, help="report JSON; CSV is written next to it")
        p.add_argument("--dataset", default="corpus")
        p.add_argument("--per-document", action="store_true", help="search only the question's own document")
        p.add_argument("--inline-timings", action="store_true",
                       help="keep wall-clock timings in the report instead of a .timings.json sidecar")
        p.set_defaults(func=cmd_eval if name == "eval" else cmd_compare)

    for p in sub.choices.values():
        _shared(p)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        s = resolve(args)
        if s["intents_file"] and args.generator is None:
            s["generator"] = "file"
        return args.func(args, s)
    except (CLIError, ValueError, KeyError, ProviderError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline.

One subcommand per stage: ingest raw collections, extract per-query
training sequences, train and sample the character model, build
wordclouds, assemble assessment tasks, run the collection service, and
aggregate the submitted rankings.
"""

from __future__ import annotations

import argparse
import glob as globlib
import gzip
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import aggregate, corpus, experiment, lstm, service, synth, windowing

log = logging.getLogger("synthdoc.cli")


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


def _open_docs_file(path: Path):
    if path.suffix.lower() in (".gz", ".z"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _iter_raw_documents(patterns):
    """Documents from every file matching the given globs.

    The source tag of a file is its parent directory's name, uppercased;
    TREC collections arrive as one directory per source.
    """
    files = sorted({Path(p) for pat in patterns
                    for p in globlib.glob(pat, recursive=True)})
    files = [f for f in files if f.is_file()]
    if not files:
        raise SystemExit("error: no document files match %s" % ", ".join(patterns))
    for f in files:
        log.info("reading %s", f)
        with _open_docs_file(f) as fh:
            yield from corpus.parse_trec_documents(
                fh, source_tag=f.parent.name.upper())


def cmd_ingest(args) -> int:
    with open(args.topics, "rb") as fh:
        topics = corpus.parse_topics(fh)
    with open(args.qrels, "rb") as fh:
        qrels = corpus.parse_qrels(fh)
    vocab = corpus.write_corpus(args.out, _iter_raw_documents(args.docs),
                                topics, qrels,
                                exclude_sources=args.exclude_source)
    print("corpus %s: %d topics, %d qrels entries, %d vocabulary terms"
          % (args.out, len(topics), len(qrels), len(vocab)))
    return 0


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


def _load_stopwords(path: str | None) -> corpus.StopwordList:
    if path:
        return corpus.StopwordList.load(path)
    return corpus.StopwordList.default()


def cmd_extract(args) -> int:
    cd = corpus.CorpusDir(args.corpus)
    topics = cd.load_topics()
    if args.query != "all":
        wanted = int(args.query)
        topics = [t for t in topics if t.id == wanted]
        if not topics:
            raise SystemExit("error: query %d not found in corpus topics" % wanted)
    qrels = cd.load_qrels()
    stop = _load_stopwords(args.stopwords)
    cfg = windowing.WindowConfig(radius=args.radius,
                                 min_training_chars=args.min_chars)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    written = 0
    for topic in topics:
        docnos = list(dict.fromkeys(corpus.relevant_docnos(qrels, topic.id)))
        present = [d for d in docnos if d in cd]
        for d in docnos:
            if d not in cd:
                log.warning("query %d: relevant document %s not in corpus",
                            topic.id, d)
        row = {"query_id": topic.id, "relevant_docs": len(docnos),
               "docs_in_corpus": len(present)}
        try:
            seq = windowing.build_training_sequence(
                topic, (cd.get_document(d) for d in present), cfg, stop)
        except windowing.NoTrainingDataError:
            row.update(docs_with_windows=0, training_chars=0,
                       sufficient=False, status="no_data")
            rows.append(row)
            log.warning("query %d: no training data", topic.id)
            continue
        sufficient = windowing.check_sufficiency(seq, cfg)
        row.update(docs_with_windows=len(seq.doc_spans),
                   training_chars=seq.char_count(),
                   sufficient=sufficient,
                   status="ok" if sufficient else "insufficient")
        rows.append(row)
        if sufficient:
            windowing.save_training_sequence(seq, out / ("q%d.json" % topic.id))
            written += 1
        else:
            log.warning("query %d: %d training chars, need %d",
                        topic.id, seq.char_count(), cfg.min_training_chars)

    with open(out / "extraction_report.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print("extracted %d/%d training sequences into %s"
          % (written, len(rows), out))
    return 0


# ---------------------------------------------------------------------------
# train / sample / gradcheck
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    seq = windowing.load_training_sequence(args.seq)
    cfg = lstm.TrainConfig(
        layers=args.layers, hidden=args.hidden, embed_dim=args.embed_dim,
        seq_length=args.seq_length, batch_size=args.batch_size,
        learning_rate=args.lr, grad_clip=args.grad_clip, epochs=args.epochs,
        rng_seed=args.seed, dtype=args.dtype)
    resume = lstm.load_checkpoint(args.resume) if args.resume else None
    result = lstm.train(seq, cfg, checkpoint_path=args.out,
                        checkpoint_every=args.checkpoint_every, resume=resume)
    first = result.losses[0] if result.losses else float("nan")
    last = result.losses[-1] if result.losses else float("nan")
    print("query %d: %d optimizer steps, loss %.4f -> %.4f, checkpoint %s"
          % (seq.query_id, result.steps, first, last, args.out))
    return 0


def cmd_sample(args) -> int:
    ck = lstm.load_checkpoint(args.checkpoint)
    cfg = lstm.SampleConfig(temperature=args.temperature, max_len=args.max_len,
                            rng_seed=args.seed, greedy=args.greedy)
    text = lstm.sample(ck.params, ck.vocab, cfg)
    if args.out == "-":
        sys.stdout.write(text + "\n")
    else:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        print("sampled %d characters into %s" % (len(text), args.out))
    return 0


def cmd_gradcheck(args) -> int:
    params, seq, seed = lstm.make_gradcheck_instance(
        args.layers, hidden=args.hidden, vocab_size=args.vocab,
        scale=args.scale, start_seed=args.seed)
    err = lstm.gradient_check(params, seq, eps=args.eps,
                              eof_index=args.vocab - 1)
    ok = err < args.tolerance
    print("layers=%d hidden=%d vocab=%d seed=%d: max relative error %.3e "
          "(tolerance %.1e) %s"
          % (args.layers, args.hidden, args.vocab, seed, err,
             args.tolerance, "PASS" if ok else "FAIL"))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# cloud / assemble
# ---------------------------------------------------------------------------


def cmd_cloud(args) -> int:
    stop = _load_stopwords(args.stopwords)
    cd = corpus.CorpusDir(args.corpus)
    if args.docno:
        doc = cd.get_document(args.docno)
        cloud = synth.relevant_doc_cloud(doc.docno, doc.text, stop, k=args.k)
    else:
        if args.query_id is None:
            raise SystemExit("error: --query-id is required with --text")
        raw = Path(args.text).read_text(encoding="utf-8")
        vocab = cd.load_vocabulary()
        prov = synth.Provenance(checkpoint_id=args.checkpoint_id,
                                sample_seed=args.sample_seed,
                                temperature=args.sample_temperature)
        doc = synth.make_synthetic_document(args.query_id, raw, vocab, stop, prov)
        cloud = synth.synthetic_doc_cloud(doc, k=args.k)
    cloud.save(args.out)
    print("wordcloud %s: %d entries -> %s"
          % (cloud.doc_ref, len(cloud.entries), args.out))
    return 0


def cmd_assemble(args) -> int:
    with open(args.topics, "rb") as fh:
        topics = corpus.parse_topics(fh)
    with open(args.qrels, "rb") as fh:
        qrels = corpus.parse_qrels(fh)
    clouds_dir = Path(args.clouds)

    chosen: dict[int, tuple] = {}
    for topic in sorted(topics, key=lambda t: t.id):
        syn_path = clouds_dir / ("synthetic-q%d.json" % topic.id)
        if not syn_path.exists():
            log.warning("query %d: no synthetic wordcloud, skipping", topic.id)
            continue
        syn_cloud = synth.WordCloud.load(syn_path)
        if syn_cloud.is_empty():
            log.warning("query %d: synthetic wordcloud is empty, skipping",
                        topic.id)
            continue
        loaded = {}
        for docno in sorted(set(corpus.relevant_docnos(qrels, topic.id))):
            path = clouds_dir / ("%s.json" % docno)
            if not path.exists():
                continue
            cloud = synth.WordCloud.load(path)
            if not cloud.is_empty():
                loaded[docno] = cloud
        try:
            selected = experiment.select_relevant_docs(
                qrels, topic.id, n=3, rng_seed=args.seed,
                eligible=loaded.keys())
        except experiment.TaskAssemblyError as exc:
            log.warning("query %d skipped: %s", topic.id, exc)
            continue
        chosen[topic.id] = (topic, [loaded[d] for d in selected], syn_cloud)

    if not chosen:
        raise SystemExit("error: no query produced an assessment task")
    schedule = experiment.assign_positions(sorted(chosen), rng_seed=args.seed)
    tasks = [experiment.build_task(topic, rel, syn, schedule, rng_seed=args.seed)
             for topic, rel, syn in (chosen[qid] for qid in sorted(chosen))]
    service.TaskStore.save(args.out, tasks)
    counts = schedule.position_counts()
    print("%d tasks -> %s; synthetic position counts: %s"
          % (len(tasks), args.out,
             " ".join("%s=%d" % (s, counts[s]) for s in experiment.SLOTS)))
    return 0


# ---------------------------------------------------------------------------
# serve / aggregate
# ---------------------------------------------------------------------------


def cmd_serve(args) -> int:
    import uvicorn

    app = service.create_app(service.TaskStore.load(args.tasks),
                             service.ResponseStore(args.responses),
                             min_seconds=args.min_seconds,
                             target_responses=args.target_responses)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_aggregate(args) -> int:
    store = service.TaskStore.load(args.tasks)
    responses = service.ResponseStore(args.responses)
    by_task: dict[str, list[experiment.UserResponse]] = {}
    for rec in responses.iter_records():
        if not rec["valid"]:
            continue
        by_task.setdefault(rec["task_id"], []).append(
            experiment.UserResponse(
                task_id=rec["task_id"], user_id=rec["user_id"],
                ranking=list(rec["ranking"]), understood=rec["understood"],
                salient_terms=list(rec["salient_terms"]),
                duration_seconds=rec["duration_seconds"],
                comment=rec.get("comment", "")))

    summaries = []
    dominance = {}
    for task_id in sorted(by_task):
        task = store.get(task_id)
        if task is None:
            log.warning("responses for unknown task %s ignored", task_id)
            continue
        summaries.append(aggregate.average_rank(by_task[task_id], task))
        dominance[task.query_id] = synth.dominance_ratio(
            task.slots[task.synthetic_slot])
    result = aggregate.report(summaries, dominance, out_dir=args.out)
    print("aggregated %d queries -> %s" % (len(result.summaries), args.out))
    if result.overall_mean is not None:
        print("overall mean synthetic rank: %.2f" % result.overall_mean)
        print("rank histogram: " + " ".join(
            "bin%d=%d" % (b, result.histogram.bins[b]) for b in (1, 2, 3, 4)))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthdoc",
        description="Per-query character models over relevant-document "
                    "context windows, wordcloud assessment tasks, and "
                    "ranking aggregation.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw TREC files into a corpus directory")
    p.add_argument("--docs", nargs="+", required=True, metavar="GLOB",
                   help="document file globs (.gz supported)")
    p.add_argument("--topics", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--exclude-source", action="append", default=[],
                   metavar="TAG", help="drop documents with this source tag")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="build per-query training sequences")
    p.add_argument("--corpus", required=True, metavar="DIR")
    p.add_argument("--query", default="all", help="query id, or 'all'")
    p.add_argument("--radius", type=int, default=30,
                   help="context terms either side of a query-term hit")
    p.add_argument("--min-chars", type=int, default=2000,
                   help="minimum training characters per query")
    p.add_argument("--stopwords", default=None, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the character model for one query")
    p.add_argument("--seq", required=True, metavar="FILE",
                   help="training sequence json from 'extract'")
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--embed-dim", type=int, default=None)
    p.add_argument("--seq-length", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--grad-clip", type=float, default=5.0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.add_argument("--checkpoint-every", type=int, default=0, metavar="N",
                   help="also checkpoint every N epochs")
    p.add_argument("--resume", default=None, metavar="CKPT")
    p.add_argument("--out", required=True, metavar="CKPT")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="sample one synthetic document")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--greedy", action="store_true",
                   help="argmax decoding instead of sampling")
    p.add_argument("--out", required=True, metavar="FILE",
                   help="output text file, or - for stdout")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("gradcheck",
                       help="compare analytic gradients with finite differences")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--vocab", type=int, default=12)
    p.add_argument("--scale", type=float, default=0.7,
                   help="weight/bias magnitude of the test instance")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0,
                   help="first seed tried for a well-conditioned instance")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("cloud", help="build a wordcloud json")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--docno", help="relevant document from the corpus")
    src.add_argument("--text", metavar="FILE",
                     help="sampled text file (synthetic document)")
    p.add_argument("--corpus", required=True, metavar="DIR")
    p.add_argument("--query-id", type=int, default=None,
                   help="query the sampled text belongs to (with --text)")
    p.add_argument("--k", type=int, default=synth.DEFAULT_CLOUD_SIZE)
    p.add_argument("--stopwords", default=None, metavar="FILE")
    p.add_argument("--checkpoint-id", default="",
                   help="provenance: checkpoint the text was sampled from")
    p.add_argument("--sample-seed", type=int, default=0,
                   help="provenance: sampling seed")
    p.add_argument("--sample-temperature", type=float, default=1.0,
                   help="provenance: sampling temperature")
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=cmd_cloud)

    p = sub.add_parser("assemble", help="build assessment tasks from wordclouds")
    p.add_argument("--clouds", required=True, metavar="DIR",
                   help="directory with <docno>.json and synthetic-q<id>.json")
    p.add_argument("--topics", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="FILE",
                   help="tasks jsonl")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("serve", help="run the assessment collection service")
    p.add_argument("--tasks", required=True, metavar="FILE")
    p.add_argument("--responses", required=True, metavar="FILE",
                   help="append-only response log (created if missing)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--min-seconds", type=float, default=20.0)
    p.add_argument("--target-responses", type=int, default=10)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("aggregate", help="summarize collected rankings")
    p.add_argument("--tasks", required=True, metavar="FILE")
    p.add_argument("--responses", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_aggregate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""TREC-style corpus ingestion: documents, topics, qrels, vocabulary, stopwords.

Documents arrive as SGML-ish streams (``<DOC>``, ``<DOCNO>``, content tags);
topics and qrels in their usual TREC text encodings. Everything downstream
(window extraction, wordclouds, salient-term checks) shares the single
tokenizer defined here.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

log = logging.getLogger(__name__)

# Reserved training separator (see windowing.EOF_CHAR); scrubbed from all
# ingested text so it can never collide with a real corpus character.
RESERVED_SEPARATOR = "\x03"

_TOKEN_RE = re.compile(r"[^\W_]+")  # unicode alphanumeric runs, no underscore
_TAG_RE = re.compile(r"<[^>]*>")

# Content-bearing elements across the TREC Disks 4&5 sub-collections
# (FT, FR94, FBIS, LA Times). Anything else inside a <DOC> is metadata.
DEFAULT_CONTENT_TAGS = (
    "TEXT",
    "HEADLINE",
    "TITLE",
    "HL",
    "HEAD",
    "TTL",
    "LEADPARA",
    "LP",
    "SUMMARY",
    "ABSTRACT",
)


class ParseError(ValueError):
    """Structural error in a corpus input stream."""


@dataclass(frozen=True)
class Document:
    docno: str
    source: str
    text: str


@dataclass(frozen=True)
class Topic:
    id: int
    title: str


@dataclass(frozen=True)
class QrelEntry:
    topic_id: int
    docno: str
    relevance: int


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters.

    Empty tokens are dropped; purely numeric tokens are kept. This is the
    one tokenizer used everywhere (vocabulary, windows, clouds, validation).
    """
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# Document stream parsing
# ---------------------------------------------------------------------------

_DOC_OPEN = b"<DOC>"
_DOC_CLOSE = b"</DOC>"


def parse_trec_documents(
    stream: BinaryIO,
    source_tag: str = "",
    encoding: str = "utf-8",
    content_tags: Iterable[str] = DEFAULT_CONTENT_TAGS,
    chunk_size: int = 1 << 16,
) -> Iterator[Document]:
    """Stream Documents out of a TREC SGML byte stream.

    Memory use is bounded by the largest single document, not the stream.
    Offsets in error messages are 1-based byte positions.
    """
    content_re = re.compile(
        r"<(%s)>(.*?)</\1>" % "|".join(re.escape(t) for t in content_tags),
        re.DOTALL | re.IGNORECASE,
    )
    buf = b""
    base = 0  # stream offset (0-based) of buf[0]
    in_doc = False
    doc_start = 0  # 0-based offset of the current <DOC>
    while True:
        chunk = stream.read(chunk_size)
        at_eof = not chunk
        buf += chunk
        while True:
            if not in_doc:
                i = buf.find(_DOC_OPEN)
                if i < 0:
                    # keep a tail in case <DOC> straddles the chunk boundary
                    keep = len(_DOC_OPEN) - 1
                    if len(buf) > keep:
                        base += len(buf) - keep
                        buf = buf[-keep:]
                    break
                base += i
                buf = buf[i:]
                doc_start = base
                in_doc = True
            j = buf.find(_DOC_CLOSE)
            if j < 0:
                break
            block = buf[: j + len(_DOC_CLOSE)]
            consumed = j + len(_DOC_CLOSE)
            base += consumed
            buf = buf[consumed:]
            in_doc = False
            yield _parse_doc_block(block, doc_start, source_tag, encoding, content_re)
        if at_eof:
            if in_doc:
                raise ParseError(
                    "unclosed DOC at offset %d" % (base + len(buf) + 1)
                )
            return


def _parse_doc_block(block, doc_start, source_tag, encoding, content_re):
    text = block.decode(encoding, errors="replace")
    m = re.search(r"<DOCNO>(.*?)</DOCNO>", text, re.DOTALL | re.IGNORECASE)
    if m is None or not m.group(1).strip():
        raise ParseError("DOC at offset %d missing DOCNO" % (doc_start + 1))
    docno = m.group(1).strip()
    bodies = []
    for cm in content_re.finditer(text):
        body = _TAG_RE.sub(" ", cm.group(2)).strip()
        if body:
            bodies.append(body)
    doc_text = "\n".join(bodies).replace(RESERVED_SEPARATOR, " ")
    if not doc_text:
        log.warning("document %s has no content text", docno)
    return Document(docno=docno, source=source_tag, text=doc_text)


# ---------------------------------------------------------------------------
# Topics and qrels
# ---------------------------------------------------------------------------


def parse_topics(stream: BinaryIO, encoding: str = "utf-8") -> list[Topic]:
    """Parse TREC topic markup; only <num> and <title> are used."""
    data = stream.read().decode(encoding, errors="replace")
    topics = []
    blocks = re.split(r"<top>", data)[1:]
    for ordinal, block in enumerate(blocks, start=1):
        block = block.split("</top>")[0]
        num_m = re.search(r"<num>([^<]*)", block)
        digits = re.search(r"(\d+)", num_m.group(1)) if num_m else None
        if digits is None:
            raise ParseError("topic %d missing num" % ordinal)
        title_m = re.search(r"<title>([^<]*)", block)
        title = " ".join(title_m.group(1).split()) if title_m else ""
        if title.lower().startswith("topic:"):
            title = title[len("topic:"):].strip()
        if not title:
            raise ParseError("topic %d missing title" % ordinal)
        topics.append(Topic(id=int(digits.group(1)), title=title))
    return topics


def parse_qrels(stream: BinaryIO, encoding: str = "utf-8") -> list[QrelEntry]:
    """Parse 4-column qrels lines: ``topic_id iter docno relevance``."""
    entries = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.decode(encoding, errors="replace").strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ParseError("qrels line %d: expected 4 fields, got %d" % (lineno, len(fields)))
        topic_s, _iter, docno, rel_s = fields
        try:
            topic_id = int(topic_s)
            relevance = int(rel_s)
        except ValueError:
            raise ParseError("qrels line %d: non-integer topic or relevance" % lineno) from None
        if relevance < 0:
            raise ParseError("qrels line %d: negative relevance" % lineno)
        entries.append(QrelEntry(topic_id=topic_id, docno=docno, relevance=relevance))
    return entries


def relevant_docnos(qrels: Iterable[QrelEntry], topic_id: int) -> list[str]:
    """Docnos judged relevant (grade > 0) for a topic, in qrels order."""
    return [q.docno for q in qrels if q.topic_id == topic_id and q.relevance > 0]


# ---------------------------------------------------------------------------
# Vocabulary and stopwords
# ---------------------------------------------------------------------------


class Vocabulary:
    """Collection term frequencies over the tokenized corpus."""

    def __init__(self, counts: dict[str, int]):
        for term, count in counts.items():
            if not term or term != term.lower() or count < 1:
                raise ValueError("invalid vocabulary entry: %r -> %r" % (term, count))
        self.counts = dict(counts)
        self.total = sum(counts.values())

    def __contains__(self, term: str) -> bool:
        return term in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def get(self, term: str) -> int:
        return self.counts.get(term, 0)

    def merge(self, other: "Vocabulary") -> "Vocabulary":
        merged = Counter(self.counts)
        merged.update(other.counts)
        return Vocabulary(dict(merged))


def build_vocabulary(docs: Iterable[Document]) -> Vocabulary:
    counts: Counter[str] = Counter()
    n = 0
    for doc in docs:
        counts.update(tokenize(doc.text))
        n += 1
    if not counts:
        log.warning("empty vocabulary built from %d documents", n)
    return Vocabulary(dict(counts))


class StopwordList:
    """Fixed lowercase stopword set loaded from a pinned list file."""

    def __init__(self, terms: Iterable[str]):
        terms = set(terms)
        if not terms:
            raise ValueError("stopword list is empty")
        if any(t != t.lower() for t in terms):
            raise ValueError("stopword entries must be lowercase")
        self.terms = terms

    def __contains__(self, term: str) -> bool:
        return term in self.terms

    def __len__(self) -> int:
        return len(self.terms)

    @classmethod
    def load(cls, path: str | Path) -> "StopwordList":
        terms = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip().lower()
            if line and not line.startswith("#"):
                terms.append(line)
        return cls(terms)

    @classmethod
    def default(cls) -> "StopwordList":
        ref = resources.files("synthdoc").joinpath("data/stopwords.txt")
        terms = []
        for line in ref.read_text(encoding="utf-8").splitlines():
            line = line.strip().lower()
            if line and not line.startswith("#"):
                terms.append(line)
        return cls(terms)


# ---------------------------------------------------------------------------
# Corpus directory: line-delimited record stores
# ---------------------------------------------------------------------------

DOCUMENTS_FILE = "documents.jsonl"
VOCABULARY_FILE = "vocabulary.jsonl"
TOPICS_FILE = "topics.jsonl"
QRELS_FILE = "qrels.jsonl"


def write_corpus(
    out_dir: str | Path,
    documents: Iterable[Document],
    topics: Iterable[Topic],
    qrels: Iterable[QrelEntry],
    exclude_sources: Iterable[str] = (),
) -> Vocabulary:
    """Persist a parsed corpus; returns the vocabulary built in the same pass.

    Documents whose source matches ``exclude_sources`` (case-insensitive)
    are dropped before they reach the store or the vocabulary.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    excluded = {s.lower() for s in exclude_sources}
    counts: Counter[str] = Counter()
    seen: set[str] = set()
    n_docs = n_excluded = 0
    with open(out / DOCUMENTS_FILE, "w", encoding="utf-8") as fh:
        for doc in documents:
            if doc.source.lower() in excluded:
                n_excluded += 1
                continue
            if doc.docno in seen:
                raise ValueError("duplicate docno: %s" % doc.docno)
            seen.add(doc.docno)
            counts.update(tokenize(doc.text))
            fh.write(json.dumps(
                {"docno": doc.docno, "source": doc.source, "text": doc.text},
                ensure_ascii=False) + "\n")
            n_docs += 1
    vocab = Vocabulary(dict(counts)) if counts else Vocabulary({})
    with open(out / VOCABULARY_FILE, "w", encoding="utf-8") as fh:
        for term in sorted(vocab.counts):
            fh.write(json.dumps({"term": term, "count": vocab.counts[term]},
                                ensure_ascii=False) + "\n")
    with open(out / TOPICS_FILE, "w", encoding="utf-8") as fh:
        for t in topics:
            fh.write(json.dumps({"id": t.id, "title": t.title}, ensure_ascii=False) + "\n")
    with open(out / QRELS_FILE, "w", encoding="utf-8") as fh:
        for q in qrels:
            fh.write(json.dumps(
                {"topic_id": q.topic_id, "docno": q.docno, "relevance": q.relevance}) + "\n")
    log.info("corpus written: %d documents (%d excluded), %d vocabulary terms",
             n_docs, n_excluded, len(vocab))
    return vocab


class CorpusDir:
    """Read access to a corpus directory written by :func:`write_corpus`.

    Document lookup uses a byte-offset index built lazily on first access,
    so single-document reads do not hold the whole store in memory.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not (self.path / DOCUMENTS_FILE).exists():
            raise FileNotFoundError("not a corpus directory: %s" % self.path)
        self._offsets: dict[str, int] | None = None

    def iter_documents(self) -> Iterator[Document]:
        with open(self.path / DOCUMENTS_FILE, "r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                yield Document(rec["docno"], rec["source"], rec["text"])

    def _index(self) -> dict[str, int]:
        if self._offsets is None:
            offsets = {}
            with open(self.path / DOCUMENTS_FILE, "rb") as fh:
                pos = fh.tell()
                for line in iter(fh.readline, b""):
                    rec = json.loads(line)
                    offsets[rec["docno"]] = pos
                    pos = fh.tell()
            self._offsets = offsets
        return self._offsets

    def get_document(self, docno: str) -> Document:
        pos = self._index().get(docno)
        if pos is None:
            raise KeyError("unknown docno: %s" % docno)
        with open(self.path / DOCUMENTS_FILE, "rb") as fh:
            fh.seek(pos)
            rec = json.loads(fh.readline())
        return Document(rec["docno"], rec["source"], rec["text"])

    def __contains__(self, docno: str) -> bool:
        return docno in self._index()

    def load_vocabulary(self) -> Vocabulary:
        counts = {}
        with open(self.path / VOCABULARY_FILE, "r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                counts[rec["term"]] = rec["count"]
        return Vocabulary(counts)

    def load_topics(self) -> list[Topic]:
        out = []
        with open(self.path / TOPICS_FILE, "r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                out.append(Topic(rec["id"], rec["title"]))
        return out

    def load_qrels(self) -> list[QrelEntry]:
        out = []
        with open(self.path / QRELS_FILE, "r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                out.append(QrelEntry(rec["topic_id"], rec["docno"], rec["relevance"]))
        return out

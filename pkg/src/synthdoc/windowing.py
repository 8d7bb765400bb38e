"""Context-window extraction and training-sequence assembly.

For a query we keep only the text near its terms: a window of ``radius``
terms either side of every query-term occurrence in each relevant document.
The rendered windows are concatenated per document and joined into one
character sequence with a reserved end-of-file separator after each
document, which is what the character model trains on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Document, Topic, tokenize

# Reserved document separator; ingestion scrubs it from corpus text.
EOF_CHAR = "\x03"


class NoTrainingDataError(ValueError):
    """Raised when a query yields zero training characters."""


@dataclass(frozen=True)
class WindowConfig:
    radius: int = 30
    min_training_chars: int = 2000

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.min_training_chars < 1:
            raise ValueError("min_training_chars must be >= 1")


@dataclass
class TrainingSequence:
    """EOF-separated character stream for one query.

    ``doc_spans`` are half-open character ranges, one per contributing
    document, each ending with its EOF separator.
    """

    query_id: int
    chars: str
    doc_spans: list[tuple[int, int]] = field(default_factory=list)

    def char_count(self) -> int:
        """Number of training characters, separators excluded."""
        return len(self.chars) - self.chars.count(EOF_CHAR)


def extract_windows(
    doc_terms: Sequence[str],
    query_terms: Iterable[str],
    radius: int,
) -> list[tuple[int, int]]:
    """Inclusive token spans of ±radius terms around each query-term hit.

    Overlapping or adjacent spans are merged; the result is disjoint and
    sorted. No hits means an empty list.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    qset = set(query_terms)
    n = len(doc_terms)
    spans: list[tuple[int, int]] = []
    for i, term in enumerate(doc_terms):
        if term not in qset:
            continue
        lo, hi = max(0, i - radius), min(n - 1, i + radius)
        if spans and lo <= spans[-1][1] + 1:
            spans[-1] = (spans[-1][0], max(spans[-1][1], hi))
        else:
            spans.append((lo, hi))
    return spans


def render_spans(doc_terms: Sequence[str], spans: Iterable[tuple[int, int]]) -> str:
    """Join each span's tokens with single spaces, spans likewise."""
    return " ".join(
        " ".join(doc_terms[lo : hi + 1]) for lo, hi in spans
    )


def query_term_set(topic: Topic, stopwords) -> set[str]:
    """Tokenized title terms with stopwords removed."""
    return {t for t in tokenize(topic.title) if t not in stopwords}


def build_training_sequence(
    query: Topic,
    rel_docs: Iterable[Document],
    cfg: WindowConfig,
    stopwords=frozenset(),
) -> TrainingSequence:
    """Concatenate rendered windows of all relevant documents, EOF-separated.

    Documents with no query-term occurrence contribute nothing. Raises
    NoTrainingDataError when no document yields any text.
    """
    qterms = query_term_set(query, stopwords)
    parts: list[str] = []
    doc_spans: list[tuple[int, int]] = []
    pos = 0
    for doc in rel_docs:
        terms = tokenize(doc.text)
        spans = extract_windows(terms, qterms, cfg.radius) if qterms else []
        if not spans:
            continue
        rendered = render_spans(terms, spans)
        parts.append(rendered + EOF_CHAR)
        doc_spans.append((pos, pos + len(rendered) + 1))
        pos += len(rendered) + 1
    if pos == 0:
        raise NoTrainingDataError("query %d: no training data" % query.id)
    return TrainingSequence(query_id=query.id, chars="".join(parts), doc_spans=doc_spans)


def check_sufficiency(seq: TrainingSequence, cfg: WindowConfig) -> bool:
    """True iff the sequence has at least min_training_chars real characters."""
    return seq.char_count() >= cfg.min_training_chars


class CharVocab:
    """Bijective character/index mapping with the EOF symbol fixed last."""

    def __init__(self, chars: Sequence[str]):
        if len(chars) != len(set(chars)):
            raise ValueError("duplicate characters in vocabulary")
        if not chars or chars[-1] != EOF_CHAR:
            raise ValueError("vocabulary must end with the EOF symbol")
        if len(chars) < 2:
            raise ValueError("vocabulary must contain at least one real character")
        self.chars = list(chars)
        self.index = {ch: i for i, ch in enumerate(self.chars)}

    @property
    def size(self) -> int:
        return len(self.chars)

    @property
    def eof_index(self) -> int:
        return len(self.chars) - 1

    def encode(self, text: str) -> list[int]:
        return [self.index[ch] for ch in text]

    def decode(self, indices: Iterable[int]) -> str:
        return "".join(self.chars[i] for i in indices)


def build_char_vocab(seq: TrainingSequence) -> CharVocab:
    """Distinct sequence characters sorted by code point, EOF appended last."""
    if not seq.chars:
        raise ValueError("cannot build a character vocabulary from an empty sequence")
    distinct = sorted(set(seq.chars) - {EOF_CHAR})
    return CharVocab(distinct + [EOF_CHAR])


def save_training_sequence(seq: TrainingSequence, path: str | Path) -> None:
    payload = {
        "query_id": seq.query_id,
        "chars": seq.chars,
        "doc_spans": [[start, stop] for start, stop in seq.doc_spans],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_training_sequence(path: str | Path) -> TrainingSequence:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    spans = [(int(a), int(b)) for a, b in raw.get("doc_spans", [])]
    return TrainingSequence(
        query_id=int(raw["query_id"]),
        chars=str(raw["chars"]),
        doc_spans=spans,
    )

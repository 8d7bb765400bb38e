"""Sampled-text postprocessing and wordcloud term statistics.

A sampled document keeps only tokens that exist in the collection
vocabulary and are not stopwords; a wordcloud is the top-150 term
frequencies of a document with weights normalized by the maximum
frequency. The dominance ratio flags clouds where one term drowns out
the rest.
"""

from __future__ import annotations

import json
import logging
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import StopwordList, Vocabulary, tokenize

log = logging.getLogger(__name__)

DEFAULT_CLOUD_SIZE = 150


@dataclass(frozen=True)
class CloudEntry:
    term: str
    freq: int
    weight: float


@dataclass
class WordCloud:
    """Top-k term frequencies, sorted by frequency desc then term asc."""

    doc_ref: str
    entries: list[CloudEntry] = field(default_factory=list)

    def terms(self) -> set[str]:
        return {e.term for e in self.entries}

    def is_empty(self) -> bool:
        return not self.entries

    def to_json(self) -> dict:
        return {"doc_ref": self.doc_ref,
                "entries": [{"term": e.term, "freq": e.freq, "weight": e.weight}
                            for e in self.entries]}

    @classmethod
    def from_json(cls, obj: dict) -> "WordCloud":
        return cls(doc_ref=obj["doc_ref"],
                   entries=[CloudEntry(e["term"], e["freq"], e["weight"])
                            for e in obj["entries"]])

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), ensure_ascii=False, indent=1),
                        encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordCloud":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Provenance:
    checkpoint_id: str
    sample_seed: int
    temperature: float


@dataclass
class SyntheticDocument:
    query_id: int
    raw_text: str
    filtered_terms: list[str]
    provenance: Provenance


def filter_terms(text: str, vocab: Vocabulary, stop: StopwordList) -> list[str]:
    """Tokenize and keep in-vocabulary, non-stopword tokens, in order."""
    kept = [t for t in tokenize(text) if t not in stop and t in vocab]
    if not kept:
        log.warning("no tokens survived vocabulary/stopword filtering")
    return kept


def make_synthetic_document(query_id: int, raw_text: str, vocab: Vocabulary,
                            stop: StopwordList, provenance: Provenance) -> SyntheticDocument:
    return SyntheticDocument(query_id=query_id, raw_text=raw_text,
                             filtered_terms=filter_terms(raw_text, vocab, stop),
                             provenance=provenance)


def top_k_frequencies(terms: Sequence[str], k: int = DEFAULT_CLOUD_SIZE,
                      doc_ref: str = "") -> WordCloud:
    """Top-k terms by frequency, ties broken lexicographically.

    Weights are frequency / max frequency. An empty input yields an empty
    cloud (callers exclude such documents from assessment).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(terms)
    if not counts:
        log.warning("empty wordcloud for %r", doc_ref)
        return WordCloud(doc_ref=doc_ref)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    max_freq = ranked[0][1]
    return WordCloud(doc_ref=doc_ref,
                     entries=[CloudEntry(term, freq, freq / max_freq)
                              for term, freq in ranked])


def relevant_doc_cloud(docno: str, text: str, stop: StopwordList,
                       k: int = DEFAULT_CLOUD_SIZE) -> WordCloud:
    """Cloud for an existing relevant document: stopwords removed first.

    Without this the same few function words would dominate every cloud in
    a task and the comparison would be meaningless.
    """
    return top_k_frequencies([t for t in tokenize(text) if t not in stop],
                             k=k, doc_ref=docno)


def synthetic_doc_cloud(doc: SyntheticDocument, k: int = DEFAULT_CLOUD_SIZE) -> WordCloud:
    return top_k_frequencies(doc.filtered_terms, k=k,
                             doc_ref="synthetic-q%d" % doc.query_id)


def dominance_ratio(cloud: WordCloud) -> float:
    """Top frequency over median frequency; a diagnostic only.

    High values mean one or two terms dominate the cloud, the known
    failure mode of bottom-ranked synthetic documents.
    """
    if cloud.is_empty():
        raise ValueError("dominance ratio of an empty cloud")
    freqs = [e.freq for e in cloud.entries]
    return freqs[0] / statistics.median(freqs)

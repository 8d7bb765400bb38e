"""Assessment-task assembly and response validation.

Each task shows one query with four wordclouds in a 2x2 grid labelled
A-D: three randomly drawn known-relevant documents and the synthetic
document, whose grid position is rotated so that every position is used
an equal number of times (up to the unavoidable remainder). Responses are
checked against a salient-term test, a minimum duration, and ranking
well-formedness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import QrelEntry, Topic, tokenize
from .synth import WordCloud

SLOTS = ("A", "B", "C", "D")
GRID_CELLS = {"A": (0, 0), "B": (0, 1), "C": (1, 0), "D": (1, 1)}

REASON_MALFORMED_RANKING = "malformed_ranking"
REASON_UNDER_TIME = "under_time"
REASON_SALIENT_TERM = "salient_term_mismatch"


class TaskAssemblyError(ValueError):
    """A query cannot be turned into a valid assessment task."""


@dataclass
class AssessmentTask:
    task_id: str
    query_id: int
    query_text: str
    slots: dict[str, WordCloud]
    synthetic_slot: str

    def __post_init__(self):
        if sorted(self.slots) != sorted(SLOTS):
            raise ValueError("task must fill exactly the slots A-D")
        if self.synthetic_slot not in SLOTS:
            raise ValueError("synthetic slot must be one of A-D")
        docnos = [self.slots[s].doc_ref for s in SLOTS if s != self.synthetic_slot]
        if len(set(docnos)) != 3:
            raise ValueError("relevant documents must be distinct")

    def payload(self) -> dict:
        """What the UI is allowed to see: no synthetic slot, no doc refs."""
        clouds = {}
        for slot in SLOTS:
            row, col = GRID_CELLS[slot]
            clouds[slot] = {
                "row": row,
                "col": col,
                "entries": [{"term": e.term, "freq": e.freq, "weight": e.weight}
                            for e in self.slots[slot].entries],
            }
        return {"task_id": self.task_id, "query_id": self.query_id,
                "query_text": self.query_text, "clouds": clouds}

    def to_json(self) -> dict:
        return {"task_id": self.task_id, "query_id": self.query_id,
                "query_text": self.query_text,
                "synthetic_slot": self.synthetic_slot,
                "slots": {s: self.slots[s].to_json() for s in SLOTS}}

    @classmethod
    def from_json(cls, obj: dict) -> "AssessmentTask":
        return cls(task_id=obj["task_id"], query_id=obj["query_id"],
                   query_text=obj["query_text"],
                   slots={s: WordCloud.from_json(c) for s, c in obj["slots"].items()},
                   synthetic_slot=obj["synthetic_slot"])


@dataclass
class RotationSchedule:
    positions: dict[int, str] = field(default_factory=dict)

    def position_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in SLOTS}
        for slot in self.positions.values():
            counts[slot] += 1
        return counts


@dataclass
class UserResponse:
    task_id: str
    user_id: str
    ranking: list[str]
    understood: bool
    salient_terms: list[str]
    duration_seconds: float
    comment: str = ""


@dataclass
class ValidationResult:
    valid: bool
    reasons: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.valid != (not self.reasons):
            raise ValueError("valid flag inconsistent with reasons")


def select_relevant_docs(qrels: Iterable[QrelEntry], query_id: int, n: int = 3,
                         rng_seed: int = 0,
                         eligible: Iterable[str] | None = None) -> list[str]:
    """Uniform sample of n relevant docnos for a query, without replacement.

    ``eligible``, when given, restricts the pool (callers drop documents
    whose wordclouds came out empty). Deterministic per (seed, query).
    """
    pool = sorted({q.docno for q in qrels
                   if q.topic_id == query_id and q.relevance > 0})
    if eligible is not None:
        allowed = set(eligible)
        pool = [d for d in pool if d in allowed]
    if len(pool) < n:
        raise TaskAssemblyError(
            "query %d has %d eligible relevant documents, need %d"
            % (query_id, len(pool), n))
    rng = random.Random("%d:%d" % (rng_seed, query_id))
    return rng.sample(pool, n)


def assign_positions(query_ids: Sequence[int], rng_seed: int = 0) -> RotationSchedule:
    """Cycle the synthetic position A-D over a seed-shuffled query order.

    Position counts over the schedule differ by at most 1.
    """
    order = list(query_ids)
    random.Random(rng_seed).shuffle(order)
    return RotationSchedule(positions={
        qid: SLOTS[k % len(SLOTS)] for k, qid in enumerate(order)})


def build_task(query: Topic, relevant_clouds: Sequence[WordCloud],
               synthetic_cloud: WordCloud, schedule: RotationSchedule,
               rng_seed: int = 0) -> AssessmentTask:
    """Place the synthetic cloud at its scheduled slot and shuffle the three
    relevant clouds over the remaining slots."""
    if len(relevant_clouds) != 3:
        raise TaskAssemblyError("expected exactly 3 relevant clouds")
    for cloud in (*relevant_clouds, synthetic_cloud):
        if cloud.is_empty():
            raise TaskAssemblyError(
                "query %d: empty wordcloud %r" % (query.id, cloud.doc_ref))
    if query.id not in schedule.positions:
        raise TaskAssemblyError("query %d not in rotation schedule" % query.id)
    synthetic_slot = schedule.positions[query.id]
    rest = [s for s in SLOTS if s != synthetic_slot]
    shuffled = list(relevant_clouds)
    random.Random("%d:task:%d" % (rng_seed, query.id)).shuffle(shuffled)
    slots = dict(zip(rest, shuffled))
    slots[synthetic_slot] = synthetic_cloud
    return AssessmentTask(task_id="q%d" % query.id, query_id=query.id,
                          query_text=query.title, slots=slots,
                          synthetic_slot=synthetic_slot)


def validate_response(task: AssessmentTask, response: UserResponse,
                      min_seconds: float = 20.0) -> ValidationResult:
    """Apply the misconduct checks; 'understood: no' is recorded, not fatal.

    Salient terms match case-insensitively after tokenization against the
    entry terms of the cloud the user ranked first.
    """
    reasons = []
    ranking_ok = sorted(response.ranking) == sorted(SLOTS)
    if not ranking_ok:
        reasons.append(REASON_MALFORMED_RANKING)
    if response.duration_seconds < min_seconds:
        reasons.append(REASON_UNDER_TIME)
    if ranking_ok:
        top_terms = task.slots[response.ranking[0]].terms()
        if len(response.salient_terms) != 2 or not all(
                _term_present(t, top_terms) for t in response.salient_terms):
            reasons.append(REASON_SALIENT_TERM)
    return ValidationResult(valid=not reasons, reasons=reasons)


def _term_present(typed: str, cloud_terms: set[str]) -> bool:
    tokens = tokenize(typed)
    return bool(tokens) and all(t in cloud_terms for t in tokens)


def synthetic_rank(task: AssessmentTask, response: UserResponse) -> int:
    """1-based rank the response gave to the synthetic cloud."""
    return response.ranking.index(task.synthetic_slot) + 1

"""Findings aggregation: per-query average synthetic rank, binning, report.

The synthetic document's rank is averaged over the valid responses of each
query, the averages are binned into rank positions 1-4, and the report
emits plot-ready CSVs plus a text summary with the overall mean.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .experiment import AssessmentTask, UserResponse, synthetic_rank

log = logging.getLogger(__name__)


@dataclass
class QueryRankSummary:
    query_id: int
    n_valid: int
    avg_rank: float
    rank_counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_valid < 1 or sum(self.rank_counts.values()) != self.n_valid:
            raise ValueError("rank counts must sum to n_valid >= 1")
        expected = sum(r * c for r, c in self.rank_counts.items()) / self.n_valid
        if abs(expected - self.avg_rank) > 1e-9:
            raise ValueError("avg_rank inconsistent with rank counts")


@dataclass
class RankHistogram:
    bins: dict[int, int] = field(default_factory=lambda: {1: 0, 2: 0, 3: 0, 4: 0})

    def total(self) -> int:
        return sum(self.bins.values())


def average_rank(responses: Sequence[UserResponse], task: AssessmentTask) -> QueryRankSummary:
    """Mean 1-based rank of the synthetic cloud over valid responses.

    Callers pass only validated responses; an empty list means the query
    must be excluded (raised, reported upstream).
    """
    if not responses:
        raise ValueError("query %d has no valid responses" % task.query_id)
    counts: dict[int, int] = {}
    for response in responses:
        rank = synthetic_rank(task, response)
        counts[rank] = counts.get(rank, 0) + 1
    n = len(responses)
    avg = sum(r * c for r, c in counts.items()) / n
    return QueryRankSummary(query_id=task.query_id, n_valid=n,
                            avg_rank=avg, rank_counts=counts)


def bin_rank(avg_rank: float) -> int:
    """Bin an average rank: <=1.5 -> 1, <=2.5 -> 2, <=3.5 -> 3, else 4.

    Closed upper bounds cover values the one-decimal interval wording
    leaves out (1.55 falls in bin 2).
    """
    if not 1.0 <= avg_rank <= 4.0:
        raise ValueError("average rank %r outside [1, 4]" % avg_rank)
    for bound, b in ((1.5, 1), (2.5, 2), (3.5, 3)):
        if avg_rank <= bound:
            return b
    return 4


def build_histogram(summaries: Iterable[QueryRankSummary]) -> RankHistogram:
    hist = RankHistogram()
    for s in summaries:
        hist.bins[bin_rank(s.avg_rank)] += 1
    return hist


@dataclass
class FindingsReport:
    summaries: list[QueryRankSummary]
    histogram: RankHistogram
    overall_mean: float | None
    dominance: dict[int, float] = field(default_factory=dict)


def report(summaries: Sequence[QueryRankSummary],
           dominance: Mapping[int, float] | None = None,
           out_dir: str | Path | None = None) -> FindingsReport:
    """Build the findings report and optionally write it out.

    Writes per-query CSV, histogram CSV and a text summary; the overall
    mean is unweighted across queries. Dominance ratios, when supplied,
    are attached to bottom-bin queries as a diagnostic.
    """
    summaries = sorted(summaries, key=lambda s: s.query_id)
    if not summaries:
        log.warning("empty findings report: no query summaries")
        result = FindingsReport([], RankHistogram(), None)
    else:
        hist = build_histogram(summaries)
        mean = sum(s.avg_rank for s in summaries) / len(summaries)
        diag = {}
        if dominance:
            for s in summaries:
                if bin_rank(s.avg_rank) == 4 and s.query_id in dominance:
                    diag[s.query_id] = dominance[s.query_id]
        result = FindingsReport(summaries, hist, mean, diag)
    if out_dir is not None:
        _write_report(result, Path(out_dir))
    return result


def _write_report(result: FindingsReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "query_ranks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["query_id", "n_valid", "avg_rank", "bin"])
        for s in result.summaries:
            w.writerow([s.query_id, s.n_valid, "%.4f" % s.avg_rank,
                        bin_rank(s.avg_rank)])
    with open(out / "rank_histogram.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "queries"])
        for b in (1, 2, 3, 4):
            w.writerow([b, result.histogram.bins[b]])
    lines = ["queries summarized: %d" % len(result.summaries)]
    if result.overall_mean is not None:
        lines.append("overall mean synthetic rank: %.2f" % result.overall_mean)
        lines.append("histogram: " + " ".join(
            "%d:%d" % (b, result.histogram.bins[b]) for b in (1, 2, 3, 4)))
    else:
        lines.append("warning: no data")
    if result.dominance:
        lines.append("dominance diagnostics (bottom-bin queries):")
        for qid, ratio in sorted(result.dominance.items()):
            lines.append("  query %d: top/median frequency ratio %.1f" % (qid, ratio))
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

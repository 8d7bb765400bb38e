"""Rank aggregation, binning, and findings report tests."""

import csv
import random
from collections import Counter

import pytest

from synthdoc.aggregate import (
    FindingsReport,
    QueryRankSummary,
    RankHistogram,
    average_rank,
    bin_rank,
    build_histogram,
    report,
)
from synthdoc.experiment import SLOTS, AssessmentTask, UserResponse
from synthdoc.synth import top_k_frequencies


def cloud(ref, *terms):
    return top_k_frequencies(list(terms), k=150, doc_ref=ref)


def make_task(qid=7, synth_slot="B"):
    slots = {}
    refs = iter(["FT-%d-1" % qid, "FT-%d-2" % qid, "LA-%d-3" % qid])
    for slot in SLOTS:
        if slot == synth_slot:
            slots[slot] = cloud("synthetic-q%d" % qid, "alpha", "beta")
        else:
            slots[slot] = cloud(next(refs), "term" + slot.lower())
    return AssessmentTask("q%d" % qid, qid, "query %d" % qid, slots, synth_slot)


def resp(task, rank, user="u"):
    others = [s for s in SLOTS if s != task.synthetic_slot]
    ranking = list(others)
    ranking.insert(rank - 1, task.synthetic_slot)
    return UserResponse(task_id=task.task_id, user_id=user, ranking=ranking,
                        understood=True, salient_terms=["alpha", "beta"],
                        duration_seconds=25.0)


class TestAverageRank:
    def test_mixed_ranks_average_exactly(self):
        task = make_task()
        responses = [resp(task, 1, "u%d" % k) for k in range(5)]
        responses += [resp(task, 2, "v%d" % k) for k in range(2)]
        responses += [resp(task, 3, "w0")]
        s = average_rank(responses, task)
        assert s.avg_rank == 1.5
        assert s.n_valid == 8
        assert s.rank_counts == {1: 5, 2: 2, 3: 1}
        assert s.query_id == 7

    def test_unanimous_first_place(self):
        task = make_task()
        s = average_rank([resp(task, 1, "u%d" % k) for k in range(4)], task)
        assert s.avg_rank == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no valid responses"):
            average_rank([], make_task())

    def test_random_against_direct_mean(self):
        rng = random.Random(31)
        task = make_task()
        for _ in range(100):
            ranks = [rng.randrange(1, 5) for _ in range(rng.randrange(1, 12))]
            responses = [resp(task, r, "u%d" % k) for k, r in enumerate(ranks)]
            s = average_rank(responses, task)
            assert s.avg_rank == pytest.approx(sum(ranks) / len(ranks))
            assert s.rank_counts == dict(Counter(ranks))

    def test_summary_invariants(self):
        with pytest.raises(ValueError):
            QueryRankSummary(1, 2, 1.0, {1: 1})
        with pytest.raises(ValueError):
            QueryRankSummary(1, 2, 3.9, {1: 1, 2: 1})
        with pytest.raises(ValueError):
            QueryRankSummary(1, 0, 0.0, {})


class TestBinRank:
    def test_named_boundaries(self):
        assert bin_rank(1.5) == 1
        assert bin_rank(1.55) == 2
        assert bin_rank(2.6) == 3

    def test_all_boundaries(self):
        cases = [(1.0, 1), (1.5, 1), (1.5000001, 2), (2.0, 2), (2.5, 2),
                 (2.5000001, 3), (3.0, 3), (3.5, 3), (3.5000001, 4), (4.0, 4)]
        for value, want in cases:
            assert bin_rank(value) == want, value

    def test_out_of_range(self):
        for value in (0.99, 4.01, -1.0, 5.0):
            with pytest.raises(ValueError):
                bin_rank(value)

    def test_matches_piecewise_oracle_on_random_values(self):
        rng = random.Random(13)
        for _ in range(1000):
            v = rng.uniform(1.0, 4.0)
            if v <= 1.5:
                want = 1
            elif v <= 2.5:
                want = 2
            elif v <= 3.5:
                want = 3
            else:
                want = 4
            assert bin_rank(v) == want


class TestHistogram:
    def test_known_partition_sums(self):
        summaries = []
        qid = 0
        for rank, n in ((1, 45), (2, 42), (3, 12), (4, 2)):
            for _ in range(n):
                summaries.append(QueryRankSummary(qid, 1, float(rank), {rank: 1}))
                qid += 1
        hist = build_histogram(summaries)
        assert hist.bins == {1: 45, 2: 42, 3: 12, 4: 2}
        assert hist.total() == 101

    def test_random_summaries_against_oracle(self):
        rng = random.Random(37)
        for _ in range(50):
            summaries = []
            for qid in range(rng.randrange(1, 30)):
                counts = {r: rng.randrange(0, 5) for r in (1, 2, 3, 4)}
                if sum(counts.values()) == 0:
                    counts[1] = 1
                counts = {r: c for r, c in counts.items() if c}
                n = sum(counts.values())
                avg = sum(r * c for r, c in counts.items()) / n
                summaries.append(QueryRankSummary(qid, n, avg, counts))
            hist = build_histogram(summaries)
            want = Counter(bin_rank(s.avg_rank) for s in summaries)
            assert hist.bins == {b: want.get(b, 0) for b in (1, 2, 3, 4)}
            assert hist.total() == len(summaries)

    def test_empty(self):
        hist = build_histogram([])
        assert hist.bins == {1: 0, 2: 0, 3: 0, 4: 0}
        assert hist.total() == 0


class TestReport:
    def test_single_query(self):
        result = report([QueryRankSummary(5, 1, 1.0, {1: 1})])
        assert result.overall_mean == 1.0
        assert result.histogram.bins == {1: 1, 2: 0, 3: 0, 4: 0}

    def test_overall_mean_is_unweighted(self):
        a = QueryRankSummary(1, 10, 1.0, {1: 10})
        b = QueryRankSummary(2, 1, 3.0, {3: 1})
        assert report([a, b]).overall_mean == 2.0

    def test_summaries_sorted_by_query(self):
        a = QueryRankSummary(9, 1, 1.0, {1: 1})
        b = QueryRankSummary(2, 1, 2.0, {2: 1})
        result = report([a, b])
        assert [s.query_id for s in result.summaries] == [2, 9]

    def test_empty_report(self):
        result = report([])
        assert result.summaries == []
        assert result.overall_mean is None
        assert isinstance(result, FindingsReport)

    def test_dominance_attached_only_to_bottom_bin(self):
        a = QueryRankSummary(1, 1, 1.0, {1: 1})
        b = QueryRankSummary(2, 1, 4.0, {4: 1})
        result = report([a, b], dominance={1: 3.0, 2: 57.0, 99: 1.0})
        assert result.dominance == {2: 57.0}

    def test_written_files(self, tmp_path):
        summaries = [QueryRankSummary(101, 2, 1.5, {1: 1, 2: 1}),
                     QueryRankSummary(102, 1, 4.0, {4: 1})]
        report(summaries, dominance={102: 12.34}, out_dir=tmp_path)

        with open(tmp_path / "query_ranks.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["query_id", "n_valid", "avg_rank", "bin"]
        assert rows[1] == ["101", "2", "1.5000", "1"]
        assert rows[2] == ["102", "1", "4.0000", "4"]

        with open(tmp_path / "rank_histogram.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows == [["bin", "queries"], ["1", "1"], ["2", "0"],
                        ["3", "0"], ["4", "1"]]

        text = (tmp_path / "summary.txt").read_text()
        assert "queries summarized: 2" in text
        assert "overall mean synthetic rank: 2.75" in text
        assert "histogram: 1:1 2:0 3:0 4:1" in text
        assert "query 102: top/median frequency ratio 12.3" in text

    def test_empty_report_writes_warning(self, tmp_path):
        report([], out_dir=tmp_path)
        text = (tmp_path / "summary.txt").read_text()
        assert "queries summarized: 0" in text
        assert "warning: no data" in text

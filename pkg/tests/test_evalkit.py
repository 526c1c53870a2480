"""Tests for retrieval metrics and task definitions."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from fivr.evalkit import (
    PR_CURVE_BINS,
    TASKS,
    TaskSpec,
    average_precision,
    evaluate,
    interpolated_pr,
    mean_average_precision,
    precision_recall,
    temporal_split,
)

from util import make_video


def precision_at(ranking, relevant, k):
    """Slice-counting precision, deliberately naive."""
    return sum(1 for vid in ranking[:k] if vid in relevant) / k


def recall_at(ranking, relevant, k):
    return sum(1 for vid in ranking[:k] if vid in relevant) / len(relevant)


def ap_reference(ranking, relevant):
    """Quadratic textbook AP: precision at each relevant hit, averaged
    over every known relevant video."""
    total = 0.0
    for k, vid in enumerate(ranking, start=1):
        if vid in relevant:
            total += precision_at(ranking, relevant, k)
    return total / len(relevant)


def curve_reference(rankings, relevant_sets, bins):
    """Per-bin interpolated precision averaged over queries, rebuilt
    from the slice-counting helpers."""
    levels = [j / (bins - 1) for j in range(bins)]
    curve = []
    for level in levels:
        per_query = []
        for ranking, relevant in zip(rankings, relevant_sets):
            best = 0.0
            for k in range(1, len(ranking) + 1):
                if recall_at(ranking, relevant, k) >= level:
                    best = max(best, precision_at(ranking, relevant, k))
            per_query.append(best)
        curve.append((level, sum(per_query) / len(per_query)))
    return curve


def random_case(rng, max_corpus=100):
    n = int(rng.integers(2, max_corpus + 1))
    corpus = [f"v{i:03d}" for i in range(n)]
    order = rng.permutation(n)
    depth = int(rng.integers(1, n + 1))
    ranking = [corpus[i] for i in order[:depth]]
    n_rel = int(rng.integers(1, n + 1))
    relevant = set(rng.choice(corpus, size=n_rel, replace=False))
    return ranking, relevant


class TestAveragePrecision:
    def test_two_relevant_at_ranks_one_and_three(self):
        ranking = ["hit1", "miss", "hit2"]
        relevant = {"hit1", "hit2"}
        assert abs(average_precision(ranking, relevant) - 5 / 6) < 1e-12

    def test_perfect_ranking_scores_one(self):
        ranking = ["a", "b", "c"]
        assert average_precision(ranking, {"a", "b", "c"}) == 1.0

    def test_unretrieved_relevant_video_counts_as_zero(self):
        assert average_precision(["a"], {"a", "never"}) == 0.5

    def test_relevant_buried_at_the_bottom(self):
        ranking = ["x", "y", "z", "hit"]
        assert average_precision(ranking, {"hit"}) == 0.25

    def test_matches_reference_on_random_cases(self):
        rng = np.random.default_rng(1188)
        for _ in range(80):
            ranking, relevant = random_case(rng)
            got = average_precision(ranking, relevant)
            want = ap_reference(ranking, relevant)
            assert abs(got - want) < 1e-12

    def test_empty_relevant_set_is_an_error(self):
        with pytest.raises(ValueError, match="relevant set is empty"):
            average_precision(["a"], set())

    def test_duplicate_ranking_entry_is_an_error(self):
        with pytest.raises(ValueError, match="duplicate id 'a'"):
            average_precision(["a", "b", "a"], {"b"})


class TestPrecisionRecall:
    def test_three_point_curve(self):
        points = precision_recall(["a", "b", "c"], {"a", "c"})
        assert points[0] == (1.0, 0.5)
        assert points[1] == (0.5, 0.5)
        assert points[2] == (2 / 3, 1.0)

    def test_matches_reference_on_random_cases(self):
        rng = np.random.default_rng(404)
        for _ in range(40):
            ranking, relevant = random_case(rng, max_corpus=40)
            points = precision_recall(ranking, relevant)
            for k, (precision, recall) in enumerate(points, start=1):
                assert abs(precision - precision_at(ranking, relevant, k)) < 1e-12
                assert abs(recall - recall_at(ranking, relevant, k)) < 1e-12

    def test_recall_ends_at_one_when_all_found(self):
        points = precision_recall(["b", "a"], {"a", "b"})
        assert points[-1][1] == 1.0


class TestTasks:
    def test_positive_label_nesting(self):
        assert TASKS["dsvr"].positive_labels < TASKS["csvr"].positive_labels
        assert TASKS["csvr"].positive_labels < TASKS["isvr"].positive_labels

    def test_relevant_for_filters_by_query_and_label(self):
        truth = {
            ("q1", "a"): "ND",
            ("q1", "b"): "CS",
            ("q1", "c"): "DI",
            ("q2", "d"): "DS",
        }
        task = TASKS["dsvr"]
        assert task.relevant_for("q1", truth) == {"a"}
        assert TASKS["csvr"].relevant_for("q1", truth) == {"a", "b"}
        assert task.relevant_for("q2", truth) == {"d"}

    def test_distinct_label_is_never_positive(self):
        for task in TASKS.values():
            assert "DI" not in task.positive_labels


class TestMeanAveragePrecision:
    TRUTH = {
        ("q1", "a"): "ND",
        ("q1", "b"): "DS",
        ("q2", "c"): "DS",
        ("q3", "d"): "IS",
    }

    def test_mean_over_usable_queries(self):
        rankings = {
            "q1": ["a", "x", "b"],
            "q2": ["y", "c"],
        }
        result = mean_average_precision(rankings, self.TRUTH, TASKS["dsvr"])
        assert abs(result.per_query_ap["q1"] - 5 / 6) < 1e-12
        assert result.per_query_ap["q2"] == 0.5
        assert abs(result.map_score - (5 / 6 + 0.5) / 2) < 1e-12

    def test_query_without_positives_is_skipped_with_warning(self, caplog):
        rankings = {"q1": ["a"], "q3": ["d"]}
        with caplog.at_level(logging.WARNING, logger="fivr.evalkit"):
            result = mean_average_precision(rankings, self.TRUTH, TASKS["dsvr"])
        assert list(result.per_query_ap) == ["q1"]
        assert any(
            "q3" in record.getMessage() for record in caplog.records
        )

    def test_no_usable_query_is_an_error(self):
        with pytest.raises(ValueError, match="no query has positives"):
            mean_average_precision({"q3": ["d"]}, self.TRUTH, TASKS["dsvr"])


class TestInterpolatedCurve:
    def test_single_query_frozen_curve(self):
        rankings = {"q": ["a", "b", "c"]}
        truth = {("q", "a"): "ND", ("q", "c"): "ND"}
        curve = interpolated_pr(rankings, truth, TASKS["dsvr"])
        assert len(curve) == PR_CURVE_BINS
        for level, precision in curve:
            if level <= 0.5:
                assert precision == 1.0
            else:
                assert abs(precision - 2 / 3) < 1e-12

    def test_matches_reference_on_random_cases(self):
        rng = np.random.default_rng(909)
        for _ in range(20):
            n_queries = int(rng.integers(1, 4))
            rankings = {}
            truth = {}
            ranking_list = []
            relevant_list = []
            for q in range(n_queries):
                ranking, relevant = random_case(rng, max_corpus=30)
                qid = f"q{q}"
                rankings[qid] = ranking
                for vid in relevant:
                    truth[(qid, vid)] = "ND"
                ranking_list.append(ranking)
                relevant_list.append(relevant)
            curve = interpolated_pr(rankings, truth, TASKS["dsvr"])
            want = curve_reference(ranking_list, relevant_list, PR_CURVE_BINS)
            for (gl, gp), (wl, wp) in zip(curve, want):
                assert gl == wl
                assert abs(gp - wp) < 1e-12

    def test_curve_is_non_increasing(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            ranking, relevant = random_case(rng, max_corpus=50)
            truth = {("q", vid): "DS" for vid in relevant}
            curve = interpolated_pr({"q": ranking}, truth, TASKS["dsvr"])
            precisions = [p for _, p in curve]
            assert all(a >= b for a, b in zip(precisions, precisions[1:]))

    def test_needs_two_bins(self):
        truth = {("q", "a"): "ND"}
        with pytest.raises(ValueError, match="two recall bins"):
            interpolated_pr({"q": ["a"]}, truth, TASKS["dsvr"], bins=1)


class TestEvaluate:
    def test_bundles_map_and_curve(self):
        rankings = {"q": ["a", "b"]}
        truth = {("q", "a"): "ND"}
        result = evaluate(rankings, truth, TASKS["dsvr"])
        assert result.map_score == 1.0
        assert len(result.curve) == PR_CURVE_BINS
        assert result.curve[0] == (0.0, 1.0)


class TestTemporalSplit:
    def videos(self):
        return [
            make_video("a", published="2017-06-01T00:00:00"),
            make_video("b", published="2017-06-02T00:00:00"),
            make_video("c", published="2017-06-03T00:00:00"),
            make_video("d", published="2017-06-04T00:00:00"),
            make_video("e", published="2017-06-05T00:00:00"),
        ]

    def test_earlier_half_trains_extra_goes_to_test(self):
        train, test = temporal_split(self.videos())
        assert train == ["a", "b"]
        assert test == ["c", "d", "e"]

    def test_even_count_splits_in_half(self):
        train, test = temporal_split(self.videos()[:4])
        assert train == ["a", "b"]
        assert test == ["c", "d"]

    def test_input_order_does_not_matter(self):
        videos = self.videos()
        rng = np.random.default_rng(5)
        for _ in range(10):
            shuffled = [videos[i] for i in rng.permutation(len(videos))]
            assert temporal_split(shuffled) == temporal_split(videos)

    def test_publication_ties_break_by_id(self):
        videos = [
            make_video("z", published="2017-06-01T00:00:00"),
            make_video("a", published="2017-06-01T00:00:00"),
            make_video("m", published="2017-06-01T00:00:00"),
            make_video("b", published="2017-06-02T00:00:00"),
        ]
        train, test = temporal_split(videos)
        assert train == ["a", "m"]
        assert test == ["z", "b"]

"""Retrieval metrics and evaluation tasks.

Three nested tasks grade a ranking against annotation labels: duplicate
scene retrieval (ND and DS positive), complementary scene retrieval
(adds CS), and incident scene retrieval (adds IS).  Average precision
follows the classic ranked-list form: the mean over all known relevant
videos of precision at each relevant hit, so relevant videos missing
from the ranking contribute zero.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)

PR_CURVE_BINS = 21


@dataclass(frozen=True)
class TaskSpec:
    """An evaluation task: which labels count as relevant."""

    name: str
    positive_labels: frozenset

    def relevant_for(self, query_id: str, truth: dict) -> set:
        return {
            video_id
            for (q, video_id), label in truth.items()
            if q == query_id and label in self.positive_labels
        }


TASKS = {
    "dsvr": TaskSpec("dsvr", frozenset({"ND", "DS"})),
    "csvr": TaskSpec("csvr", frozenset({"ND", "DS", "CS"})),
    "isvr": TaskSpec("isvr", frozenset({"ND", "DS", "CS", "IS"})),
}


@dataclass(frozen=True)
class EvalResult:
    """Per-query APs, their mean, and an interpolated PR curve."""

    task: str
    per_query_ap: dict
    map_score: float
    curve: tuple = ()


def _check_ranking(ranking: list) -> None:
    if len(set(ranking)) != len(ranking):
        seen = set()
        for video_id in ranking:
            if video_id in seen:
                raise ValueError(f"duplicate id {video_id!r} in ranking")
            seen.add(video_id)


def precision_recall(
    ranking: list, relevant: set
) -> list[tuple[float, float]]:
    """Precision and recall after each rank position."""
    if not relevant:
        raise ValueError("relevant set is empty, precision/recall undefined")
    _check_ranking(ranking)
    points = []
    hits = 0
    for rank, video_id in enumerate(ranking, start=1):
        if video_id in relevant:
            hits += 1
        points.append((hits / rank, hits / len(relevant)))
    return points


def average_precision(ranking: list, relevant: set) -> float:
    """Mean over all relevant videos of precision at their rank.

    A relevant video the ranking never retrieves contributes zero, so a
    truncated ranking is penalized rather than forgiven.
    """
    if not relevant:
        raise ValueError("relevant set is empty, AP undefined")
    _check_ranking(ranking)
    hits = 0
    total = 0.0
    for rank, video_id in enumerate(ranking, start=1):
        if video_id in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def _usable_queries(rankings: dict, truth: dict, task: TaskSpec) -> dict:
    usable = {}
    for query_id, ranking in rankings.items():
        relevant = task.relevant_for(query_id, truth)
        if not relevant:
            logger.warning(
                "query %s has no %s positives and is excluded",
                query_id,
                task.name,
            )
            continue
        usable[query_id] = (ranking, relevant)
    return usable


def mean_average_precision(
    rankings: dict, truth: dict, task: TaskSpec
) -> EvalResult:
    """mAP over queries; queries without positives are warned and skipped."""
    usable = _usable_queries(rankings, truth, task)
    if not usable:
        raise ValueError(f"no query has positives for task {task.name}")
    per_query = {
        query_id: average_precision(ranking, relevant)
        for query_id, (ranking, relevant) in sorted(usable.items())
    }
    map_score = sum(per_query.values()) / len(per_query)
    return EvalResult(task=task.name, per_query_ap=per_query, map_score=map_score)


def interpolated_pr(
    rankings: dict, truth: dict, task: TaskSpec, bins: int = PR_CURVE_BINS
) -> tuple:
    """Interpolated precision-recall curve averaged over queries.

    At each recall bin r the per-query precision is the maximum precision
    among rank positions whose recall is at least r (zero when the
    ranking never gets that far); the curve is the mean over queries and
    is non-increasing by construction.
    """
    if bins < 2:
        raise ValueError("need at least two recall bins")
    usable = _usable_queries(rankings, truth, task)
    if not usable:
        raise ValueError(f"no query has positives for task {task.name}")
    recall_levels = [j / (bins - 1) for j in range(bins)]
    curve = []
    for level in recall_levels:
        precisions = []
        for ranking, relevant in usable.values():
            points = precision_recall(ranking, relevant)
            reachable = [p for p, r in points if r >= level]
            precisions.append(max(reachable) if reachable else 0.0)
        curve.append((level, sum(precisions) / len(precisions)))
    return tuple(curve)


def evaluate(rankings: dict, truth: dict, task: TaskSpec) -> EvalResult:
    """mAP plus the interpolated curve in one result."""
    base = mean_average_precision(rankings, truth, task)
    curve = interpolated_pr(rankings, truth, task)
    return EvalResult(
        task=base.task,
        per_query_ap=base.per_query_ap,
        map_score=base.map_score,
        curve=curve,
    )


def temporal_split(videos) -> tuple[list, list]:
    """Split videos by publication time: earlier half trains, rest tests.

    Videos sort by (published_at, video_id); with an odd count the extra
    video goes to the test side.
    """
    ordered = sorted(videos, key=lambda v: (v.published_at, v.video_id))
    cut = len(ordered) // 2
    train = [v.video_id for v in ordered[:cut]]
    test = [v.video_id for v in ordered[cut:]]
    return train, test

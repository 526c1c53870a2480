"""Query selection from the video similarity graph.

Videos whose combined visual-textual similarity clears a threshold form
a graph; its connected components group footage of the same incident.
Components that look organic (many distinct uploaders, a tight
publication window) each contribute one query: the earliest-published
short video.  Components are ranked by size, biggest first.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace

from .ingest import Catalog

EDGE_THRESHOLD = 0.7
MIN_UPLOADER_RATIO = 0.75
MAX_SPAN_DAYS = 14
MAX_QUERY_DURATION_S = 90
MIN_COMPONENT_SIZE = 3
DEFAULT_TOP_N = 100


@dataclass(frozen=True)
class SimilarityGraph:
    """Videos as nodes, similar pairs as weighted undirected edges."""

    nodes: frozenset
    edges: tuple

    def __post_init__(self):
        for a, b, _ in self.edges:
            if a == b:
                raise ValueError(f"self loop on {a!r}")
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge ({a!r}, {b!r}) references unknown node")

    @classmethod
    def from_edges(cls, node_ids, edges) -> "SimilarityGraph":
        return cls(
            nodes=frozenset(node_ids),
            edges=tuple((a, b, float(score)) for a, b, score in edges),
        )


@dataclass(frozen=True)
class Component:
    """One connected component, optionally profiled against a catalog."""

    members: tuple
    uploader_ratio: "float | None" = None
    published_min: "dt.datetime | None" = None
    published_max: "dt.datetime | None" = None

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def span(self) -> "dt.timedelta | None":
        if self.published_min is None or self.published_max is None:
            return None
        return self.published_max - self.published_min


class _UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self):
        self.parent: dict = {}
        self.weight: dict = {}

    def find(self, item):
        if item not in self.parent:
            self.parent[item] = item
            self.weight[item] = 1
            return item
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.weight[ra] < self.weight[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.weight[ra] += self.weight[rb]


def connected_components(graph: SimilarityGraph) -> list[Component]:
    """Components with at least three members, deterministically ordered.

    Isolated and barely-connected videos cannot corroborate an incident,
    so smaller groups drop out here.
    """
    uf = _UnionFind()
    for a, b, _ in sorted(graph.edges, key=lambda e: (e[0], e[1])):
        uf.union(a, b)
    groups: dict = {}
    for node in graph.nodes:
        if node in uf.parent:
            groups.setdefault(uf.find(node), []).append(node)
    components = [
        Component(members=tuple(sorted(members)))
        for members in groups.values()
        if len(members) >= MIN_COMPONENT_SIZE
    ]
    components.sort(key=lambda c: c.members)
    return components


def uploader_ratio(component: Component, catalog: Catalog) -> float:
    """Distinct uploaders over component size.

    A ratio near 1 means many independent witnesses; near 0 means one
    account flooding near-identical uploads.
    """
    uploaders = {catalog.get(vid).uploader_id for vid in component.members}
    return len(uploaders) / component.size


def profile_component(component: Component, catalog: Catalog) -> Component:
    """Fill in uploader ratio and publication window from the catalog."""
    times = [catalog.get(vid).published_at for vid in component.members]
    return replace(
        component,
        uploader_ratio=uploader_ratio(component, catalog),
        published_min=min(times),
        published_max=max(times),
    )


def filter_components(
    components: list[Component],
    catalog: Catalog,
    min_ratio: float = MIN_UPLOADER_RATIO,
    max_span_days: int = MAX_SPAN_DAYS,
) -> list[Component]:
    """Keep components that look like organic multi-witness coverage.

    A component survives when its uploader ratio is at least ``min_ratio``
    and its publication span is at most ``max_span_days`` days.  Survivors
    come back profiled; input order is preserved.
    """
    max_span = dt.timedelta(days=max_span_days)
    kept = []
    for component in components:
        profiled = profile_component(component, catalog)
        if profiled.uploader_ratio >= min_ratio and profiled.span <= max_span:
            kept.append(profiled)
    return kept


def pick_query(
    component: Component,
    catalog: Catalog,
    max_duration_s: int = MAX_QUERY_DURATION_S,
) -> "str | None":
    """Earliest-published member strictly shorter than ``max_duration_s``.

    Ties on publication time break by video id.  Returns None when no
    member is short enough, in which case the component yields no query.
    """
    eligible = [
        vid
        for vid in component.members
        if catalog.get(vid).duration_s < max_duration_s
    ]
    if not eligible:
        return None
    return min(eligible, key=lambda vid: (catalog.get(vid).published_at, vid))


def rank_components(components: list[Component]) -> list[Component]:
    """Order by size, biggest first; ties by earliest publication, then ids."""
    return sorted(
        components,
        key=lambda c: (
            -c.size,
            c.published_min or dt.datetime.max.replace(tzinfo=dt.timezone.utc),
            c.members,
        ),
    )


@dataclass(frozen=True)
class QueryPick:
    """A selected query with the component that produced it."""

    rank: int
    video_id: str
    component: Component


def rank_and_take(
    components: list[Component],
    catalog: Catalog,
    top: int = DEFAULT_TOP_N,
    max_duration_s: int = MAX_QUERY_DURATION_S,
) -> list[QueryPick]:
    """Rank components and take the first ``top`` that yield a query."""
    picks: list[QueryPick] = []
    for component in rank_components(components):
        if len(picks) >= top:
            break
        video_id = pick_query(component, catalog, max_duration_s=max_duration_s)
        if video_id is None:
            continue
        picks.append(
            QueryPick(rank=len(picks) + 1, video_id=video_id, component=component)
        )
    return picks


def select_queries(
    edges,
    catalog: Catalog,
    min_ratio: float = MIN_UPLOADER_RATIO,
    max_span_days: int = MAX_SPAN_DAYS,
    max_duration_s: int = MAX_QUERY_DURATION_S,
    top: int = DEFAULT_TOP_N,
) -> list[QueryPick]:
    """Full selection pass: edges in, ranked query picks out."""
    graph = SimilarityGraph.from_edges(catalog.ids(), edges)
    components = connected_components(graph)
    survivors = filter_components(
        components, catalog, min_ratio=min_ratio, max_span_days=max_span_days
    )
    return rank_and_take(
        survivors, catalog, top=top, max_duration_s=max_duration_s
    )

"""Synthetic incident worlds with exact relation ground truth.

A world assigns each video a list of scenes, each scene an incident id,
a half-open span on the global timeline, and a viewpoint id.  Incidents
own disjoint spans, scenes capture parts of them.  From those attributes
alone the scene-relation oracle decides, in the query direction, whether
a candidate is a duplicate scene (DS), a complementary scene from
another camera (CS), same-incident footage with no overlap (IS), a full
near-duplicate (ND, the DS clause holding for every candidate scene), or
distinct (DI).  Precedence is ND > DS > CS > IS > DI.

The generator plants exact per-query quotas of each label and renders
per-second descriptor vectors from per-(incident, viewpoint) base
vectors plus a weaker shared incident component and Gaussian noise, so
retrieval quality degrades smoothly as the noise scale grows.
"""

from __future__ import annotations

import datetime as dt
import re
import zlib
from dataclasses import dataclass, field

import numpy as np

from .features import DescriptorSequence
from .ingest import Catalog, VideoRecord
from .records import decode, encode

LABELS = ("ND", "DS", "CS", "IS", "DI")

TRANSFORMS = ("none", "brightness", "crop", "noise", "recompress")

# Scalar magnitude tweaks per transform tag; cosine similarity is scale
# invariant, so tagged reposts stay retrievable by construction.
_TRANSFORM_SCALE = {
    "none": 1.0,
    "brightness": 1.08,
    "crop": 0.95,
    "noise": 1.0,
    "recompress": 0.99,
}
_TRANSFORM_JITTER = {"noise": 0.02, "recompress": 0.005}

_BASE_WEIGHT = np.sqrt(0.75)
_SHARED_WEIGHT = np.sqrt(0.25)

_EPOCH = dt.datetime(2017, 6, 1, tzinfo=dt.timezone.utc)


@dataclass(frozen=True)
class SceneAttrib:
    """One scene: which incident, which slice of its span, which camera."""

    incident: int
    span: tuple[float, float]
    viewpoint: int

    def __post_init__(self):
        start, end = self.span
        if not start < end:
            raise ValueError(f"empty or inverted span {self.span}")
        if self.incident < 0 or self.viewpoint < 0:
            raise ValueError("incident and viewpoint ids must be >= 0")


@dataclass(frozen=True)
class SynthVideo:
    """A synthetic video: ordered scenes plus an optional transform tag."""

    video_id: str
    scenes: tuple[SceneAttrib, ...]
    transform: str = "none"

    def __post_init__(self):
        if not self.scenes:
            raise ValueError(f"video {self.video_id!r} has no scenes")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")

    def duration_s(self) -> int:
        total = sum(end - start for start, end in
                    (scene.span for scene in self.scenes))
        return int(np.ceil(total - 1e-9))


@dataclass
class SynthWorld:
    """Videos, incident spans, designated queries, and planted labels."""

    videos: dict[str, SynthVideo]
    incident_spans: dict[int, tuple[float, float]]
    queries: list[str] = field(default_factory=list)
    planted: dict[tuple[str, str], str] = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> None:
        for video in self.videos.values():
            for scene in video.scenes:
                if scene.incident not in self.incident_spans:
                    raise ValueError(
                        f"video {video.video_id!r} uses unknown incident "
                        f"{scene.incident}"
                    )
                inc_start, inc_end = self.incident_spans[scene.incident]
                start, end = scene.span
                if start < inc_start or end > inc_end:
                    raise ValueError(
                        f"video {video.video_id!r} scene {scene.span} leaves "
                        f"incident span ({inc_start}, {inc_end})"
                    )
        for query_id in self.queries:
            if query_id not in self.videos:
                raise ValueError(f"designated query {query_id!r} not in world")


def merged_spans(video: SynthVideo) -> list[tuple[float, float]]:
    """The video's aggregated span: scene spans merged where they touch."""
    spans = sorted(scene.span for scene in video.scenes)
    merged = [spans[0]]
    for start, end in spans[1:]:
        last_start, last_end = merged[-1]
        if start <= last_end:
            merged[-1] = (last_start, max(last_end, end))
        else:
            merged.append((start, end))
    return merged


def _contained(span: tuple[float, float], merged: list[tuple[float, float]]) -> bool:
    start, end = span
    return any(ms <= start and end <= me for ms, me in merged)


def _viewpoints(video: SynthVideo) -> set[int]:
    return {scene.viewpoint for scene in video.scenes}


def _incidents(video: SynthVideo) -> set[int]:
    return {scene.incident for scene in video.scenes}


def relation_ds(query: SynthVideo, candidate: SynthVideo) -> bool:
    """Some candidate scene lies inside the query's aggregated span and
    was captured from one of the query's viewpoints."""
    spans = merged_spans(query)
    views = _viewpoints(query)
    return any(
        _contained(scene.span, spans) and scene.viewpoint in views
        for scene in candidate.scenes
    )


def relation_nd(query: SynthVideo, candidate: SynthVideo) -> bool:
    """Every candidate scene satisfies the duplicate-scene clause."""
    spans = merged_spans(query)
    views = _viewpoints(query)
    return all(
        _contained(scene.span, spans) and scene.viewpoint in views
        for scene in candidate.scenes
    )


def relation_cs(query: SynthVideo, candidate: SynthVideo) -> bool:
    """Some candidate scene lies inside the query's aggregated span but
    comes from a camera the query never uses."""
    spans = merged_spans(query)
    views = _viewpoints(query)
    return any(
        _contained(scene.span, spans) and scene.viewpoint not in views
        for scene in candidate.scenes
    )


def relation_is(query: SynthVideo, candidate: SynthVideo) -> bool:
    """The candidate shares an incident with the query while none of its
    scenes falls inside the query's aggregated span."""
    spans = merged_spans(query)
    incidents = _incidents(query)
    shares = any(scene.incident in incidents for scene in candidate.scenes)
    overlaps = any(_contained(scene.span, spans) for scene in candidate.scenes)
    return shares and not overlaps


def label_pair(query: SynthVideo, candidate: SynthVideo) -> str:
    """Single label for the pair, query direction, fixed precedence."""
    if relation_nd(query, candidate):
        return "ND"
    if relation_ds(query, candidate):
        return "DS"
    if relation_cs(query, candidate):
        return "CS"
    if relation_is(query, candidate):
        return "IS"
    return "DI"


@dataclass(frozen=True)
class WorldConfig:
    """Quota-driven world shape; one planted group per designated query."""

    queries: int = 4
    nd_per_query: int = 2
    ds_per_query: int = 2
    cs_per_query: int = 1
    is_per_query: int = 2
    di_per_query: int = 3
    viewpoints: int = 3
    seed: int = 7
    transform_fraction: float = 0.0

    def validate(self) -> None:
        if self.queries < 1:
            raise ValueError("need at least one query")
        for name in ("nd_per_query", "ds_per_query", "cs_per_query",
                     "is_per_query", "di_per_query"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.viewpoints < 1:
            raise ValueError("need at least one viewpoint")
        if self.cs_per_query > 0 and self.viewpoints < 2:
            raise ValueError(
                "CS quota needs a second viewpoint: a complementary scene "
                "must come from a camera the query does not use"
            )
        if self.is_per_query > 0 and self.viewpoints < 2:
            raise ValueError(
                "IS quota needs a second viewpoint: same-camera footage "
                "renders identically and would read as a duplicate"
            )
        if not 0 <= self.transform_fraction <= 1:
            raise ValueError("transform_fraction must be in [0, 1]")


def generate_world(config: WorldConfig) -> SynthWorld:
    """Build a world embedding exact per-query label quotas.

    Each query gets a private incident; duplicate and complementary
    scenes sit inside the query's span, same-incident footage sits
    outside it, and distractors get incidents of their own so nothing
    leaks across groups.  Deterministic for a given config.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    world = SynthWorld(videos={}, incident_spans={}, seed=config.seed)
    next_incident = 0

    def new_incident() -> int:
        nonlocal next_incident
        incident = next_incident
        next_incident += 1
        base = incident * 1000.0
        world.incident_spans[incident] = (base, base + 100.0)
        return incident

    def add(video: SynthVideo) -> None:
        world.videos[video.video_id] = video

    n_views = config.viewpoints
    for q in range(config.queries):
        incident = new_incident()
        base = world.incident_spans[incident][0]
        query_view = int(rng.integers(n_views))
        query_id = f"v{q:02d}q"
        query_span = (base + 10.0, base + 40.0)
        add(SynthVideo(
            video_id=query_id,
            scenes=(SceneAttrib(incident, query_span, query_view),),
        ))
        world.queries.append(query_id)
        group: list[tuple[str, str]] = []
        for j in range(config.nd_per_query):
            vid = f"v{q:02d}nd{j}"
            span = (base + 12.0 + j, base + 32.0 + j)
            add(SynthVideo(vid, (SceneAttrib(incident, span, query_view),)))
            group.append((vid, "ND"))
        for j in range(config.ds_per_query):
            vid = f"v{q:02d}ds{j}"
            foreign = new_incident()
            fbase = world.incident_spans[foreign][0]
            add(SynthVideo(vid, (
                SceneAttrib(incident, (base + 15.0 + j, base + 25.0 + j),
                            query_view),
                SceneAttrib(foreign, (fbase + 10.0, fbase + 20.0), query_view),
            )))
            group.append((vid, "DS"))
        for j in range(config.cs_per_query):
            vid = f"v{q:02d}cs{j}"
            other_view = (query_view + 1 + j % (n_views - 1)) % n_views
            span = (base + 14.0 + j, base + 26.0 + j)
            add(SynthVideo(vid, (SceneAttrib(incident, span, other_view),)))
            group.append((vid, "CS"))
        for j in range(config.is_per_query):
            vid = f"v{q:02d}is{j}"
            other_view = (query_view + 1 + j % (n_views - 1)) % n_views
            span = (base + 55.0 + j, base + 70.0 + j)
            add(SynthVideo(vid, (SceneAttrib(incident, span, other_view),)))
            group.append((vid, "IS"))
        for j in range(config.di_per_query):
            vid = f"v{q:02d}di{j}"
            distractor = new_incident()
            dbase = world.incident_spans[distractor][0]
            view = int(rng.integers(n_views))
            add(SynthVideo(vid, (
                SceneAttrib(distractor, (dbase + 10.0, dbase + 35.0), view),
            )))
            group.append((vid, "DI"))
        for vid, label in group:
            world.planted[(query_id, vid)] = label

    if config.transform_fraction > 0:
        # Tag a deterministic slice of non-query videos as reposts.
        candidates = sorted(set(world.videos) - set(world.queries))
        count = int(round(config.transform_fraction * len(candidates)))
        tagged = rng.choice(len(candidates), size=count, replace=False)
        for index in sorted(int(i) for i in tagged):
            vid = candidates[index]
            old = world.videos[vid]
            transform = TRANSFORMS[1 + int(rng.integers(len(TRANSFORMS) - 1))]
            world.videos[vid] = SynthVideo(
                video_id=vid, scenes=old.scenes, transform=transform
            )

    # Cross-group pairs never share incidents or spans, so everything a
    # quota did not plant is distinct by construction.
    for query_id in world.queries:
        for vid in world.videos:
            if vid != query_id and (query_id, vid) not in world.planted:
                world.planted[(query_id, vid)] = "DI"
    world.validate()
    return world


def random_world(
    n_videos: int,
    n_incidents: int,
    n_viewpoints: int,
    seed: int,
    max_scenes: int = 3,
) -> SynthWorld:
    """Unstructured world for fuzzing the oracle: random scene soup."""
    if min(n_videos, n_incidents, n_viewpoints, max_scenes) < 1:
        raise ValueError("all world dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    world = SynthWorld(videos={}, incident_spans={}, seed=seed)
    for incident in range(n_incidents):
        base = incident * 1000.0
        world.incident_spans[incident] = (base, base + 100.0)
    for i in range(n_videos):
        scenes = []
        for _ in range(int(rng.integers(1, max_scenes + 1))):
            incident = int(rng.integers(n_incidents))
            base = world.incident_spans[incident][0]
            start = base + float(np.round(rng.uniform(0.0, 90.0), 1))
            length = float(np.round(rng.uniform(1.0, 100.0 - (start - base)), 1))
            scenes.append(SceneAttrib(
                incident=incident,
                span=(start, start + length),
                viewpoint=int(rng.integers(n_viewpoints)),
            ))
        world.videos[f"r{i:03d}"] = SynthVideo(f"r{i:03d}", tuple(scenes))
    world.queries = sorted(world.videos)[: max(1, n_videos // 4)]
    world.validate()
    return world


def _slot_layout(world: SynthWorld, rng) -> tuple[dict, dict, int]:
    """One orthogonal basis slot per (incident, viewpoint) plus one per
    incident; orthogonality pins unrelated cosines to zero."""
    pairs = sorted(
        {(s.incident, s.viewpoint)
         for v in world.videos.values() for s in v.scenes}
    )
    incidents = sorted(world.incident_spans)
    slots = len(pairs) + len(incidents)
    order = rng.permutation(slots)
    pair_slot = {pair: int(order[i]) for i, pair in enumerate(pairs)}
    incident_slot = {
        inc: int(order[len(pairs) + i]) for i, inc in enumerate(incidents)
    }
    return pair_slot, incident_slot, slots


def render_descriptors(
    world: SynthWorld,
    sigma: float,
    dim: int | None = None,
    channels: tuple[str, ...] = ("color", "texture"),
) -> dict[str, DescriptorSequence]:
    """Render one descriptor vector per second of footage per channel.

    A scene's signature is a unit mix of its (incident, viewpoint) base
    direction and a weaker incident-shared direction; ``sigma`` scales
    added Gaussian noise.  With ``sigma`` 0, videos sharing a scene
    signature render identical frames and unrelated videos are exactly
    orthogonal.  Transform tags rescale magnitudes and add a small
    deterministic jitter, leaving directions essentially intact.
    """
    if sigma < 0:
        raise ValueError(f"noise scale must be >= 0, got {sigma}")
    rng = np.random.default_rng(world.seed + 101)
    layouts = {name: _slot_layout(world, rng) for name in channels}
    needed = max(slots for _, _, slots in layouts.values())
    if dim is None:
        dim = needed
    elif dim < needed:
        raise ValueError(f"dim {dim} cannot hold {needed} basis directions")
    out: dict[str, DescriptorSequence] = {}
    for video_id in sorted(world.videos):
        video = world.videos[video_id]
        rendered: dict[str, np.ndarray] = {}
        for name in channels:
            pair_slot, incident_slot, _ = layouts[name]
            frames = []
            for scene in video.scenes:
                signature = np.zeros(dim)
                signature[pair_slot[(scene.incident, scene.viewpoint)]] = (
                    _BASE_WEIGHT
                )
                signature[incident_slot[scene.incident]] = _SHARED_WEIGHT
                seconds = int(np.ceil(scene.span[1] - scene.span[0] - 1e-9))
                for _ in range(seconds):
                    frames.append(signature.copy())
            frames = np.stack(frames)
            scale = _TRANSFORM_SCALE[video.transform]
            jitter = _TRANSFORM_JITTER.get(video.transform, 0.0)
            if jitter > 0:
                tag_rng = np.random.default_rng(
                    (world.seed, zlib.crc32(video_id.encode()), len(name))
                )
                frames = frames + tag_rng.normal(0.0, jitter, frames.shape)
            frames = frames * scale
            if sigma > 0:
                frames = frames + rng.normal(0.0, sigma, frames.shape)
            rendered[name] = frames
        out[video_id] = DescriptorSequence(channels=rendered)
    return out


def world_catalog(world: SynthWorld) -> Catalog:
    """Deterministic metadata for a generated world.

    Designated queries publish first within their group and stay short;
    relatives follow within days; every uploader is distinct so planted
    components pass the organic-coverage filters.  Titles share an
    incident token within a group, which gives the textual channel the
    same group structure the visual channel has.
    """
    catalog = Catalog()
    groups: dict[str, list[str]] = {q: [] for q in world.queries}
    extras: list[str] = []
    generated_id = re.compile(r"^(v\d+)(?:nd|ds|cs|is|di)\d+$")
    for video_id in sorted(world.videos):
        if video_id in world.queries:
            continue
        match = generated_id.match(video_id)
        owner = f"{match.group(1)}q" if match else None
        if owner in groups:
            groups[owner].append(video_id)
        else:
            extras.append(video_id)

    def title_for(video: SynthVideo) -> str:
        first = video.scenes[0]
        parts = [f"incident i{first.incident}", f"camera c{first.viewpoint}"]
        if len(video.scenes) > 1:
            second = video.scenes[1]
            parts.append(f"with incident i{second.incident} mashup")
        elif first.span[0] - world.incident_spans[first.incident][0] >= 50:
            parts.append("aftermath")
        else:
            parts.append("footage")
        return " ".join(parts)

    for q_index, query_id in enumerate(world.queries):
        base_time = _EPOCH + dt.timedelta(days=30 * q_index)
        members = [query_id] + groups.get(query_id, [])
        for offset, video_id in enumerate(members):
            video = world.videos[video_id]
            catalog.add(VideoRecord(
                video_id=video_id,
                title=title_for(video),
                published_at=base_time + dt.timedelta(hours=6 * offset),
                duration_s=video.duration_s(),
                uploader_id=f"u-{video_id}",
                event_id=f"e{q_index:02d}",
            ))
    for offset, video_id in enumerate(extras):
        video = world.videos[video_id]
        catalog.add(VideoRecord(
            video_id=video_id,
            title=title_for(video),
            published_at=_EPOCH + dt.timedelta(days=400, hours=offset),
            duration_s=video.duration_s(),
            uploader_id=f"u-{video_id}",
        ))
    return catalog


def save_world(world: SynthWorld, path) -> None:
    """Write a world as field-named records, floats kept exact."""
    rows: list[dict[str, str | list[str]]] = []
    for incident in sorted(world.incident_spans):
        start, end = world.incident_spans[incident]
        rows.append({
            "kind": "incident",
            "incident_id": str(incident),
            "start": repr(start),
            "end": repr(end),
        })
    for video_id in sorted(world.videos):
        video = world.videos[video_id]
        rows.append({
            "kind": "video",
            "video_id": video_id,
            "transform": video.transform,
            "scene": [
                f"{s.incident} {s.span[0]!r} {s.span[1]!r} {s.viewpoint}"
                for s in video.scenes
            ],
        })
    for query_id in world.queries:
        rows.append({"kind": "query", "video_id": query_id})
    rows.append({"kind": "meta", "seed": str(world.seed)})
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(encode(rows))


def load_world(path) -> SynthWorld:
    with open(path, encoding="utf-8") as handle:
        rows = decode(handle.read())
    world = SynthWorld(videos={}, incident_spans={})
    for row in rows:
        kind = row.get("kind")
        if kind == "incident":
            world.incident_spans[int(row["incident_id"])] = (
                float(row["start"]),
                float(row["end"]),
            )
        elif kind == "video":
            raw_scenes = row["scene"]
            if isinstance(raw_scenes, str):
                raw_scenes = [raw_scenes]
            scenes = []
            for raw in raw_scenes:
                incident, start, end, viewpoint = raw.split()
                scenes.append(SceneAttrib(
                    incident=int(incident),
                    span=(float(start), float(end)),
                    viewpoint=int(viewpoint),
                ))
            world.videos[row["video_id"]] = SynthVideo(
                video_id=row["video_id"],
                scenes=tuple(scenes),
                transform=row.get("transform", "none"),
            )
        elif kind == "query":
            world.queries.append(row["video_id"])
        elif kind == "meta":
            world.seed = int(row.get("seed", "0"))
        else:
            raise ValueError(f"unknown world record kind {kind!r}")
    for query_id in world.queries:
        for vid in world.videos:
            if vid != query_id:
                world.planted[(query_id, vid)] = label_pair(
                    world.videos[query_id], world.videos[vid]
                )
    world.validate()
    return world

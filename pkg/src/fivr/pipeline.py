"""End-to-end orchestration over a data directory.

A data directory is the unit of state: catalog and event fixtures at the
top, descriptors, codebooks, and indexes in subdirectories, then query
manifests, ground-truth labels, and evaluation results.  The synthetic
path chains world generation, descriptor rendering, vocabulary training,
indexing, query selection, and evaluation; every stage is deterministic
for a given seed, so two runs into different directories produce
byte-identical files.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import annotate, evalkit, index, selectq, synth, textsim, vocab
from .features import DescriptorSequence, load_descriptors, save_descriptors
from .ingest import (
    Catalog,
    EventRecord,
    filter_events,
    filter_videos_for_event,
    format_event_listing,
    load_catalog,
    parse_event_listing,
    write_catalog,
)
from .vocab import Codebook, DocumentFrequencies, SparseVector

logger = logging.getLogger(__name__)

METHODS = ("bow", "lbow", "gv", "emb", "hash")
DEFAULT_K = 64
DEFAULT_HASH_BITS = 64
LABEL_HEADER = ("query_id", "video_id", "label")
VECTOR_HEADER = ("video_id", "term", "weight")


@dataclass(frozen=True)
class DataDir:
    """Canonical layout of one corpus working directory."""

    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    @property
    def events_path(self) -> Path:
        return self.root / "events.txt"

    @property
    def catalog_path(self) -> Path:
        return self.root / "catalog.tsv"

    @property
    def world_path(self) -> Path:
        return self.root / "world.txt"

    @property
    def descriptors_dir(self) -> Path:
        return self.root / "descriptors"

    @property
    def codebooks_dir(self) -> Path:
        return self.root / "codebooks"

    @property
    def indexes_dir(self) -> Path:
        return self.root / "indexes"

    @property
    def visual_index_path(self) -> Path:
        return self.indexes_dir / "visual.fvix"

    @property
    def textual_index_path(self) -> Path:
        return self.indexes_dir / "textual.fvix"

    def visual_vectors_path(self, m: int = 1) -> Path:
        return self.root / f"vectors_visual_m{m}.tsv"

    @property
    def textual_vectors_path(self) -> Path:
        return self.root / "vectors_textual.tsv"

    @property
    def queries_path(self) -> Path:
        return self.root / "queries.tsv"

    @property
    def labels_path(self) -> Path:
        return self.root / "labels.tsv"

    @property
    def annotations_path(self) -> Path:
        return self.root / "annotations.tsv"

    @property
    def results_dir(self) -> Path:
        return self.root / "results"

    @property
    def sessions_dir(self) -> Path:
        return self.root / "sessions"

    @property
    def keyframes_dir(self) -> Path:
        return self.root / "keyframes"

    def ensure(self) -> "DataDir":
        for path in (
            self.root,
            self.descriptors_dir,
            self.codebooks_dir,
            self.indexes_dir,
            self.results_dir,
            self.sessions_dir,
        ):
            path.mkdir(parents=True, exist_ok=True)
        return self


def descriptor_path(data: DataDir, video_id: str) -> Path:
    return data.descriptors_dir / f"{video_id}.fvds"


def load_all_descriptors(data: DataDir) -> dict[str, DescriptorSequence]:
    out: dict[str, DescriptorSequence] = {}
    for path in sorted(data.descriptors_dir.glob("*.fvds")):
        out[path.stem] = load_descriptors(path)
    return out


def stacked_frames(sequence: DescriptorSequence) -> np.ndarray:
    """Frames with all channels concatenated along the feature axis."""
    return np.concatenate(list(sequence.channels.values()), axis=1).astype(
        np.float64
    )


def _synthetic_events(world: synth.SynthWorld, catalog: Catalog) -> list[EventRecord]:
    events = []
    for q_index, query_id in enumerate(world.queries):
        published = catalog.get(query_id).published_at
        events.append(EventRecord(
            event_id=f"e{q_index:02d}",
            headline=f"incident i{world.videos[query_id].scenes[0].incident} "
                     "footage emerges",
            date=published.date(),
            category="Disasters and accidents",
            summary="synthetic incident",
        ))
    return events


def stage_synth(
    data: DataDir,
    config: synth.WorldConfig,
    sigma: float = 0.0,
    render_keyframes: bool = False,
) -> synth.SynthWorld:
    """Generate a world and materialize it: world file, catalog, events,
    descriptors, ground-truth labels."""
    data.ensure()
    world = synth.generate_world(config)
    catalog = synth.world_catalog(world)
    synth.save_world(world, data.world_path)
    write_catalog(catalog, data.catalog_path)
    with open(data.events_path, "w", encoding="utf-8") as handle:
        handle.write(format_event_listing(_synthetic_events(world, catalog)))
    rendered = synth.render_descriptors(world, sigma=sigma)
    for video_id, sequence in rendered.items():
        save_descriptors(sequence, descriptor_path(data, video_id))
    write_labels(world.planted, data.labels_path)
    if render_keyframes:
        _render_keyframe_strips(data, catalog)
    return world


def write_labels(planted: dict, path) -> None:
    lines = ["\t".join(LABEL_HEADER)]
    for (query_id, video_id) in sorted(planted):
        lines.append(
            "\t".join((query_id, video_id, planted[(query_id, video_id)]))
        )
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def read_labels(path) -> dict:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != LABEL_HEADER:
        raise ValueError(f"{path}: missing label table header")
    truth = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 3:
            raise ValueError(f"{path}: line {line_no}: expected 3 columns")
        query_id, video_id, label = cells
        if label not in annotate.LABELS:
            raise ValueError(f"{path}: line {line_no}: unknown label {label!r}")
        truth[(query_id, video_id)] = label
    return truth


def load_truth(data: DataDir) -> dict:
    """Ground truth for evaluation: planted labels if present, otherwise
    exported annotations."""
    if data.labels_path.exists():
        return read_labels(data.labels_path)
    if data.annotations_path.exists():
        rows = annotate.read_annotation_table(data.annotations_path)
        return annotate.truth_map(rows)
    raise FileNotFoundError(
        f"{data.root}: no labels.tsv or annotations.tsv to evaluate against"
    )


def stage_ingest(data: DataDir) -> Catalog:
    """Load fixtures and apply the ingest filters.

    Events outside the retained categories drop; videos tied to an event
    must fall in its publication window and under the duration cap.
    Videos without an event pass through untouched.
    """
    catalog = load_catalog(data.catalog_path)
    if not data.events_path.exists():
        return catalog
    with open(data.events_path, encoding="utf-8") as handle:
        events = parse_event_listing(handle.read())
    retained = {event.event_id: event for event in filter_events(events)}
    kept = Catalog()
    for video_id in catalog.ids():
        video = catalog.videos[video_id]
        if video.event_id is None:
            kept.add(video)
            continue
        event = retained.get(video.event_id)
        if event is None:
            continue
        if filter_videos_for_event(event, [video]):
            kept.add(video)
    dropped = len(catalog) - len(kept)
    if dropped:
        logger.info("ingest filters dropped %d of %d videos", dropped, len(catalog))
    return kept


def bow_vectors(
    descriptors: dict[str, DescriptorSequence],
    codebooks: dict[str, Codebook],
    m: int = 1,
) -> dict[str, SparseVector]:
    """Count, weight, and normalize bag-of-words vectors for a corpus."""
    counts = {
        video_id: vocab.aggregate_bow(descriptors[video_id], codebooks, m=m)
        for video_id in sorted(descriptors)
    }
    dfs = DocumentFrequencies.from_corpus(counts.values())
    return {
        video_id: vocab.tf_idf(count, dfs) for video_id, count in counts.items()
    }


def stage_vocab(
    data: DataDir,
    descriptors: dict[str, DescriptorSequence],
    k: int = DEFAULT_K,
    seed: int = 7,
    m: int = 1,
) -> tuple[dict[str, Codebook], dict[str, SparseVector]]:
    """Train one codebook per channel over all frames, then encode."""
    if not descriptors:
        raise ValueError("no descriptors to train on")
    channel_names = list(next(iter(descriptors.values())).channels)
    codebooks: dict[str, Codebook] = {}
    for offset, name in enumerate(channel_names):
        sample = np.concatenate(
            [descriptors[vid].channel(name) for vid in sorted(descriptors)]
        )
        effective_k = min(k, sample.shape[0])
        codebooks[name] = vocab.train_codebook(
            sample, k=effective_k, seed=seed + offset, channel=name
        )
        vocab.save_codebook(codebooks[name], data.codebooks_dir / f"{name}.fvcb")
    vectors = bow_vectors(descriptors, codebooks, m=m)
    write_vectors(vectors, data.visual_vectors_path(m))
    return codebooks, vectors


def stage_textsim(data: DataDir, catalog: Catalog) -> dict[str, SparseVector]:
    """Title tokens to tf-idf vectors for every cataloged video."""
    stopwords = textsim.load_stopwords()
    verbs = textsim.load_verb_lexicon()
    tokens = {
        video_id: textsim.preprocess_title(
            catalog.get(video_id).title, stopwords, verbs
        )
        for video_id in catalog.ids()
    }
    dictionary = textsim.build_dictionary(tokens.values())
    counts = {
        video_id: textsim.count_vector(toks, dictionary)
        for video_id, toks in tokens.items()
    }
    dfs = DocumentFrequencies.from_corpus(counts.values())
    vectors = {
        video_id: vocab.tf_idf(count, dfs)
        for video_id, count in sorted(counts.items())
    }
    write_vectors(vectors, data.textual_vectors_path)
    return vectors


def write_vectors(vectors: dict[str, SparseVector], path) -> None:
    """Sparse vectors as a 3-column table: video_id, term, weight."""
    lines = ["\t".join(VECTOR_HEADER)]
    for video_id in sorted(vectors):
        for term, weight in vectors[video_id].entries:
            lines.append(f"{video_id}\t{term}\t{weight!r}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def read_vectors(path) -> dict[str, SparseVector]:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != VECTOR_HEADER:
        raise ValueError(f"{path}: missing vector table header")
    entries: dict[str, dict[int, float]] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 3:
            raise ValueError(f"{path}: line {line_no}: expected 3 columns")
        video_id, term, weight = cells
        entries.setdefault(video_id, {})[int(term)] = float(weight)
    return {
        video_id: SparseVector.from_mapping(mapping)
        for video_id, mapping in entries.items()
    }


def load_codebooks(
    data: DataDir, channel_order: "list[str] | None" = None
) -> dict[str, Codebook]:
    """All saved codebooks, keyed by channel.

    Insertion order decides term offsets in multi-channel aggregation, so
    callers that know the descriptor channel order should pass it; the
    fallback is sorted channel names, which matches how training iterates
    for the built-in channel sets.
    """
    books = {}
    for path in sorted(data.codebooks_dir.glob("*.fvcb")):
        book = vocab.load_codebook(path)
        books[book.channel] = book
    if not books:
        raise FileNotFoundError(f"{data.codebooks_dir}: no codebooks found")
    if channel_order is not None:
        if set(channel_order) != set(books):
            raise ValueError(
                f"codebooks {sorted(books)} do not match channels {channel_order}"
            )
        books = {name: books[name] for name in channel_order}
    return books


def stage_index(
    data: DataDir,
    visual_vectors: dict[str, SparseVector],
    textual_vectors: dict[str, SparseVector],
) -> tuple[index.InvertedIndex, index.InvertedIndex]:
    visual = index.build_index(sorted(visual_vectors.items()))
    textual = index.build_index(sorted(textual_vectors.items()))
    index.save_index(visual, data.visual_index_path)
    index.save_index(textual, data.textual_index_path)
    return visual, textual


def write_queries(picks: list[selectq.QueryPick], path) -> None:
    lines = ["\t".join(("rank", "component_size", "video_id", "uploader_ratio",
                        "span_s"))]
    for pick in picks:
        component = pick.component
        lines.append("\t".join((
            str(pick.rank),
            str(component.size),
            pick.video_id,
            repr(component.uploader_ratio),
            repr(component.span.total_seconds()),
        )))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def read_query_ids(path) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    return [line.split("\t")[2] for line in lines[1:] if line.strip()]


def stage_selectq(
    data: DataDir,
    catalog: Catalog,
    visual: index.InvertedIndex,
    textual: index.InvertedIndex,
    edge_threshold: float = selectq.EDGE_THRESHOLD,
    min_ratio: float = selectq.MIN_UPLOADER_RATIO,
    max_span_days: int = selectq.MAX_SPAN_DAYS,
    max_duration_s: int = selectq.MAX_QUERY_DURATION_S,
    top: int = selectq.DEFAULT_TOP_N,
) -> list[selectq.QueryPick]:
    edges = index.all_pairs_edges(visual, textual, edge_threshold)
    picks = selectq.select_queries(
        edges,
        catalog,
        min_ratio=min_ratio,
        max_span_days=max_span_days,
        max_duration_s=max_duration_s,
        top=top,
    )
    write_queries(picks, data.queries_path)
    return picks


def _dense_rankings(
    query_ids: list[str],
    vectors: dict[str, np.ndarray],
    kind: str,
) -> dict[str, list[str]]:
    rankings = {}
    for query_id in query_ids:
        scored = [
            (index.dense_similarity(vectors[query_id], vectors[vid], kind=kind),
             vid)
            for vid in sorted(vectors)
            if vid != query_id
        ]
        scored.sort(key=lambda item: (-item[0], item[1]))
        rankings[query_id] = [vid for _, vid in scored]
    return rankings


def _sparse_rankings(
    query_ids: list[str],
    vectors: dict[str, SparseVector],
) -> dict[str, list[str]]:
    ivx = index.build_index(sorted(vectors.items()))
    rankings = {}
    for query_id in query_ids:
        ranked = index.query_top_k(ivx, vectors[query_id], k=len(vectors))
        rankings[query_id] = [vid for vid, _ in ranked if vid != query_id]
    return rankings


def method_rankings(
    method: str,
    query_ids: list[str],
    descriptors: dict[str, DescriptorSequence],
    codebooks: dict[str, Codebook],
    seed: int = 7,
    hash_bits: int = DEFAULT_HASH_BITS,
) -> dict[str, list[str]]:
    """Candidate rankings for each query under one similarity route."""
    if method in ("bow", "lbow"):
        m = 1 if method == "bow" else 3
        vectors = bow_vectors(descriptors, codebooks, m=m)
        return _sparse_rankings(query_ids, vectors)
    frames = {vid: stacked_frames(seq) for vid, seq in descriptors.items()}
    if method in ("gv", "emb"):
        globals_ = {vid: index.global_vector(f) for vid, f in frames.items()}
        kind = "cosine" if method == "gv" else "euclidean"
        return _dense_rankings(query_ids, globals_, kind)
    if method == "hash":
        sample = np.concatenate([frames[vid] for vid in sorted(frames)])
        family = index.train_hash_family(sample, bits=hash_bits, seed=seed)
        codes = {
            vid: index.encode_video(f, family) for vid, f in frames.items()
        }
        rankings = {}
        for query_id in query_ids:
            scored = [
                (index.hamming_similarity(codes[query_id], codes[vid]), vid)
                for vid in sorted(codes)
                if vid != query_id
            ]
            scored.sort(key=lambda item: (-item[0], item[1]))
            rankings[query_id] = [vid for _, vid in scored]
        return rankings
    raise ValueError(f"unknown method {method!r}")


def write_eval_result(result: evalkit.EvalResult, method: str, path) -> None:
    """Plot-ready rows: per-query AP, the mAP, and PR curve points."""
    lines = ["\t".join(("kind", "key", "value"))]
    for query_id, ap in sorted(result.per_query_ap.items()):
        lines.append("\t".join(("ap", query_id, repr(ap))))
    lines.append("\t".join(("map", f"{method}:{result.task}",
                            repr(result.map_score))))
    for recall, precision in result.curve:
        lines.append("\t".join(("pr", repr(recall), repr(precision))))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def stage_eval(
    data: DataDir,
    query_ids: list[str],
    descriptors: dict[str, DescriptorSequence],
    codebooks: dict[str, Codebook],
    truth: dict,
    methods: tuple = ("bow",),
    tasks: tuple = ("dsvr", "csvr", "isvr"),
    seed: int = 7,
) -> dict[str, dict[str, evalkit.EvalResult]]:
    report: dict[str, dict[str, evalkit.EvalResult]] = {}
    for method in methods:
        rankings = method_rankings(
            method, query_ids, descriptors, codebooks, seed=seed
        )
        report[method] = {}
        for task_name in tasks:
            result = evalkit.evaluate(rankings, truth, evalkit.TASKS[task_name])
            report[method][task_name] = result
            write_eval_result(
                result, method, data.results_dir / f"eval_{method}_{task_name}.tsv"
            )
    return report


@dataclass
class PipelineOutcome:
    """What a full synthetic run produced, for callers and tests."""

    data: DataDir
    world: "synth.SynthWorld | None"
    catalog: Catalog
    picks: list
    report: dict = field(default_factory=dict)


def run_synthetic(
    root,
    seed: int = 7,
    sigma: float = 0.0,
    config: "synth.WorldConfig | None" = None,
    k: int = DEFAULT_K,
    methods: tuple = METHODS,
    tasks: tuple = ("dsvr", "csvr", "isvr"),
    render_keyframes: bool = False,
) -> PipelineOutcome:
    """The full synthetic chain: generate, encode, index, select, evaluate.

    Queries come from the similarity-graph selection, not the world's
    designated list, so the selection stage is exercised for real; with
    default quotas the two coincide.
    """
    if config is None:
        config = synth.WorldConfig(seed=seed)
    elif config.seed != seed:
        config = replace(config, seed=seed)
    data = DataDir(Path(root)).ensure()
    world = stage_synth(data, config, sigma=sigma, render_keyframes=render_keyframes)
    catalog = stage_ingest(data)
    descriptors = load_all_descriptors(data)
    codebooks, visual_vectors = stage_vocab(data, descriptors, k=k, seed=seed)
    textual_vectors = stage_textsim(data, catalog)
    visual, textual = stage_index(data, visual_vectors, textual_vectors)
    picks = stage_selectq(data, catalog, visual, textual)
    query_ids = [pick.video_id for pick in picks]
    report = {}
    if query_ids:
        truth = {}
        for query_id in query_ids:
            for vid in world.videos:
                if vid != query_id:
                    truth[(query_id, vid)] = synth.label_pair(
                        world.videos[query_id], world.videos[vid]
                    )
        write_labels(truth, data.labels_path)
        report = stage_eval(
            data, query_ids, descriptors, codebooks, truth,
            methods=methods, tasks=tasks, seed=seed,
        )
    else:
        logger.warning("query selection produced no queries; skipping eval")
    return PipelineOutcome(
        data=data, world=world, catalog=catalog, picks=picks, report=report
    )


def run_artifacts(
    root,
    seed: int = 7,
    k: int = DEFAULT_K,
    methods: tuple = METHODS,
    tasks: tuple = ("dsvr", "csvr", "isvr"),
) -> PipelineOutcome:
    """The artifact chain over an already-populated data directory.

    Expects events, a catalog, and extracted descriptors to exist; trains
    vocabularies, builds indexes, selects queries, and evaluates when
    ground truth is on disk.  The synthetic path is :func:`run_synthetic`.
    """
    data = DataDir(Path(root)).ensure()
    catalog = stage_ingest(data)
    descriptors = load_all_descriptors(data)
    if not descriptors:
        raise FileNotFoundError(
            f"{data.descriptors_dir}: no descriptors; extract features first"
        )
    codebooks, visual_vectors = stage_vocab(data, descriptors, k=k, seed=seed)
    textual_vectors = stage_textsim(data, catalog)
    visual, textual = stage_index(data, visual_vectors, textual_vectors)
    picks = stage_selectq(data, catalog, visual, textual)
    query_ids = [pick.video_id for pick in picks]
    report = {}
    try:
        truth = load_truth(data)
    except FileNotFoundError:
        truth = {}
    if query_ids and truth:
        report = stage_eval(
            data, query_ids, descriptors, codebooks, truth,
            methods=methods, tasks=tasks, seed=seed,
        )
    else:
        logger.warning("skipping eval: %d queries, %d truth rows",
                       len(query_ids), len(truth))
    return PipelineOutcome(
        data=data, world=None, catalog=catalog, picks=picks, report=report
    )


def _render_keyframe_strips(data: DataDir, catalog: Catalog) -> None:
    """Tiny per-second PNG tiles so the annotation UI has something to show."""
    from PIL import Image

    data.keyframes_dir.mkdir(parents=True, exist_ok=True)
    for video_id in catalog.ids():
        video = catalog.videos[video_id]
        hue = zlib.crc32(video_id.encode()) % 360
        out_dir = data.keyframes_dir / video_id
        out_dir.mkdir(parents=True, exist_ok=True)
        seconds = max(1, min(video.duration_s, 60))
        for sec in range(seconds):
            value = 0.45 + 0.5 * (sec / max(1, seconds - 1)) if seconds > 1 else 0.7
            image = Image.new(
                "HSV", (32, 18), (int(hue / 360 * 255), 170, int(value * 255))
            )
            image.convert("RGB").save(out_dir / f"{sec:03d}.png")

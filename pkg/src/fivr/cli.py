"""Command-line entry point.

Subcommands mirror the processing stages: ingest, features, vocab,
textsim, index, selectq, synth, eval, pipeline, serve.  Every command
works against one data directory, taken from ``--data`` or the
``FIVR_DATA_DIR`` environment variable (default ``./data``).

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import evalkit, index, pipeline, selectq, synth
from .binio import FormatError
from .features import (
    DescriptorSequence,
    FrameImage,
    extract_hsv_histogram,
    extract_lbp,
    load_descriptors,
    sample_keyframes,
    save_descriptors,
)
from .ingest import (
    CatalogError,
    filter_events,
    filter_videos_for_event,
    format_event_listing,
    load_catalog,
    parse_event_listing,
    write_catalog,
)
from .records import ParseError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif")


class UsageError(Exception):
    """Bad invocation: unknown flag, missing argument, out-of-range value."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; the exit-code contract
    # reserves 2 for data errors, so route usage failures through an
    # exception main() can turn into exit 1.
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage().rstrip()}")


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(
            f"{text}: similarity thresholds lie in [0, 1]"
        )
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text}: expected a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text}: expected a positive number")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text}: expected a non-negative number")
    return value


def _data_dir(args) -> pipeline.DataDir:
    root = args.data or os.environ.get("FIVR_DATA_DIR") or "data"
    return pipeline.DataDir(Path(root))


def _read_text(path) -> str:
    with open(path, encoding="utf-8") as handle:
        return handle.read()


# ---------------------------------------------------------------- ingest

def cmd_ingest_events(args) -> int:
    events = parse_event_listing(_read_text(args.file))
    retained = filter_events(events)
    data = _data_dir(args).ensure()
    with open(data.events_path, "w", encoding="utf-8") as handle:
        handle.write(format_event_listing(events))
    print(f"{len(events)} events ({len(retained)} in retained categories) "
          f"-> {data.events_path}")
    return EXIT_OK


def cmd_ingest_videos(args) -> int:
    catalog = load_catalog(args.file)
    data = _data_dir(args).ensure()
    write_catalog(catalog, data.catalog_path)
    print(f"{len(catalog.ids())} videos -> {data.catalog_path}")
    return EXIT_OK


def cmd_ingest_filter(args) -> int:
    data = _data_dir(args)
    events = parse_event_listing(_read_text(data.events_path))
    by_id = {event.event_id: event for event in events}
    if args.event not in by_id:
        raise KeyError(f"unknown event {args.event!r}")
    catalog = load_catalog(data.catalog_path)
    videos = [catalog.get(video_id) for video_id in catalog.ids()]
    for video in filter_videos_for_event(by_id[args.event], videos):
        print(video.video_id)
    return EXIT_OK


# -------------------------------------------------------------- features

def _load_frame(path) -> FrameImage:
    from PIL import Image

    with Image.open(path) as image:
        rgb = image.convert("RGB")
        return FrameImage(rgb.width, rgb.height, rgb.tobytes())


def cmd_features_extract(args) -> int:
    if not (args.hsv or args.lbp):
        raise UsageError("features extract: pass --hsv, --lbp, or both")
    frames_root = Path(args.frames_dir)
    if not frames_root.is_dir():
        raise FileNotFoundError(f"{frames_root}: not a directory")
    video_dirs = sorted(p for p in frames_root.iterdir() if p.is_dir())
    if not video_dirs:
        video_dirs = [frames_root]
    data = _data_dir(args).ensure()
    for video_dir in video_dirs:
        paths = sorted(
            p for p in video_dir.iterdir()
            if p.suffix.lower() in _IMAGE_SUFFIXES
        )
        if not paths:
            raise FileNotFoundError(f"{video_dir}: no frame images")
        frames = [_load_frame(p) for p in paths]
        keyframes = sample_keyframes(frames, args.fps)
        channels = {}
        if args.hsv:
            channels["hsv"] = np.stack(
                [extract_hsv_histogram(f) for f in keyframes]
            )
        if args.lbp:
            channels["lbp"] = np.stack([extract_lbp(f) for f in keyframes])
        sequence = DescriptorSequence(channels=channels)
        out = pipeline.descriptor_path(data, video_dir.name)
        save_descriptors(sequence, out)
        print(f"{video_dir.name}: {sequence.frame_count} keyframes -> {out}")
    return EXIT_OK


def cmd_features_import(args) -> int:
    sequence = load_descriptors(args.file)
    data = _data_dir(args).ensure()
    out = pipeline.descriptor_path(data, Path(args.file).stem)
    save_descriptors(sequence, out)
    dims = {name: array.shape[1] for name, array in sequence.channels.items()}
    print(f"{sequence.frame_count} frames, channels {dims} -> {out}")
    return EXIT_OK


# ----------------------------------------------------------------- vocab

def cmd_vocab_train(args) -> int:
    data = _data_dir(args).ensure()
    descriptors = pipeline.load_all_descriptors(data)
    codebooks, vectors = pipeline.stage_vocab(
        data, descriptors, k=args.k, seed=args.seed
    )
    for name, book in codebooks.items():
        print(f"channel {name}: k={book.centroids.shape[0]} "
              f"dim={book.centroids.shape[1]} "
              f"objective={book.objective_history[-1]:.6f}")
    print(f"{len(vectors)} vectors -> {data.visual_vectors_path(1)}")
    return EXIT_OK


def cmd_vocab_encode(args) -> int:
    data = _data_dir(args)
    descriptors = pipeline.load_all_descriptors(data)
    if not descriptors:
        raise FileNotFoundError(f"{data.descriptors_dir}: no descriptors")
    order = list(next(iter(descriptors.values())).channels)
    codebooks = pipeline.load_codebooks(data, channel_order=order)
    vectors = pipeline.bow_vectors(descriptors, codebooks, m=args.m)
    out = data.visual_vectors_path(args.m)
    pipeline.write_vectors(vectors, out)
    print(f"{len(vectors)} vectors (m={args.m}) -> {out}")
    return EXIT_OK


# --------------------------------------------------------------- textsim

def cmd_textsim_encode(args) -> int:
    catalog = load_catalog(args.metadata)
    data = _data_dir(args).ensure()
    vectors = pipeline.stage_textsim(data, catalog)
    nonzero = sum(1 for vector in vectors.values() if vector.entries)
    print(f"{len(vectors)} title vectors ({nonzero} non-empty) "
          f"-> {data.textual_vectors_path}")
    return EXIT_OK


# ----------------------------------------------------------------- index

def cmd_index_build(args) -> int:
    data = _data_dir(args).ensure()
    visual_vectors = pipeline.read_vectors(data.visual_vectors_path(args.m))
    textual_vectors = pipeline.read_vectors(data.textual_vectors_path)
    visual, textual = pipeline.stage_index(data, visual_vectors, textual_vectors)
    print(f"visual: {len(visual)} docs, {len(visual.postings)} terms "
          f"-> {data.visual_index_path}")
    print(f"textual: {len(textual)} docs, {len(textual.postings)} terms "
          f"-> {data.textual_index_path}")
    return EXIT_OK


def cmd_index_query(args) -> int:
    data = _data_dir(args)
    path = (data.visual_index_path if args.side == "visual"
            else data.textual_index_path)
    ivx = index.load_index(path)
    query = index.document_vector(ivx, args.video_id)
    hits = index.query_top_k(ivx, query, k=args.k + 1)
    shown = 0
    for video_id, score in hits:
        if video_id == args.video_id:
            continue
        print(f"{video_id}\t{score:.6f}")
        shown += 1
        if shown == args.k:
            break
    return EXIT_OK


def cmd_index_pairs(args) -> int:
    data = _data_dir(args).ensure()
    visual = index.load_index(data.visual_index_path)
    textual = index.load_index(data.textual_index_path)
    edges = index.all_pairs_edges(visual, textual, args.threshold)
    out = data.results_dir / "edges.tsv"
    with open(out, "w", encoding="utf-8") as handle:
        handle.write("video_a\tvideo_b\tcombined\n")
        for a, b, combined in edges:
            handle.write(f"{a}\t{b}\t{combined!r}\n")
    for a, b, combined in edges:
        print(f"{a}\t{b}\t{combined:.6f}")
    print(f"{len(edges)} edges above {args.threshold} -> {out}")
    return EXIT_OK


# --------------------------------------------------------------- selectq

def cmd_selectq_run(args) -> int:
    data = _data_dir(args).ensure()
    catalog = load_catalog(data.catalog_path)
    visual = index.load_index(data.visual_index_path)
    textual = index.load_index(data.textual_index_path)
    picks = pipeline.stage_selectq(
        data, catalog, visual, textual,
        edge_threshold=args.ts,
        min_ratio=args.tr,
        max_duration_s=args.td,
        top=args.top,
    )
    for pick in picks:
        print(f"{pick.rank}\t{pick.video_id}\tsize={pick.component.size}\t"
              f"ratio={pick.component.uploader_ratio:.3f}")
    print(f"{len(picks)} queries -> {data.queries_path}")
    return EXIT_OK


# ----------------------------------------------------------------- synth

def cmd_synth_gen(args) -> int:
    world = synth.random_world(
        n_videos=args.videos,
        n_incidents=args.incidents,
        n_viewpoints=args.viewpoints,
        seed=args.seed,
        max_scenes=args.max_scenes,
    )
    data = _data_dir(args).ensure()
    synth.save_world(world, data.world_path)
    catalog = synth.world_catalog(world)
    write_catalog(catalog, data.catalog_path)
    with open(data.events_path, "w", encoding="utf-8") as handle:
        handle.write(
            format_event_listing(pipeline._synthetic_events(world, catalog))
        )
    rendered = synth.render_descriptors(world, sigma=args.sigma)
    for video_id, sequence in rendered.items():
        save_descriptors(sequence, pipeline.descriptor_path(data, video_id))
    print(f"{len(world.videos)} videos, {len(world.incident_spans)} incidents, "
          f"{len(world.queries)} designated queries -> {data.root}")
    return EXIT_OK


def cmd_synth_labels(args) -> int:
    data = _data_dir(args).ensure()
    world = synth.load_world(data.world_path)
    pipeline.write_labels(world.planted, data.labels_path)
    histogram = {label: 0 for label in synth.LABELS}
    for label in world.planted.values():
        histogram[label] += 1
    counts = " ".join(f"{label}={histogram[label]}" for label in synth.LABELS)
    print(f"{len(world.planted)} pairs ({counts}) -> {data.labels_path}")
    return EXIT_OK


# ------------------------------------------------------------------ eval

def _query_ids(data: pipeline.DataDir) -> list[str]:
    if data.queries_path.exists():
        return pipeline.read_query_ids(data.queries_path)
    if data.world_path.exists():
        return list(synth.load_world(data.world_path).queries)
    raise FileNotFoundError(
        f"{data.root}: no queries.tsv or world.txt to take queries from"
    )


def cmd_eval_run(args) -> int:
    data = _data_dir(args)
    query_ids = _query_ids(data)
    truth = pipeline.load_truth(data)
    descriptors = pipeline.load_all_descriptors(data)
    if not descriptors:
        raise FileNotFoundError(f"{data.descriptors_dir}: no descriptors")
    data.ensure()
    if args.method in ("bow", "lbow"):
        order = list(next(iter(descriptors.values())).channels)
        codebooks = pipeline.load_codebooks(data, channel_order=order)
    else:
        codebooks = {}
    report = pipeline.stage_eval(
        data, query_ids, descriptors, codebooks, truth,
        methods=(args.method,), tasks=(args.task,), seed=args.seed,
    )
    result = report[args.method][args.task]
    for query_id in sorted(result.per_query_ap):
        print(f"AP\t{query_id}\t{result.per_query_ap[query_id]:.6f}")
    print(f"mAP\t{args.method}/{args.task}\t{result.map_score:.6f}")
    print(f"results -> {data.results_dir / f'eval_{args.method}_{args.task}.tsv'}")
    return EXIT_OK


# -------------------------------------------------------------- pipeline

def cmd_pipeline_run(args) -> int:
    data = _data_dir(args)
    if args.synthetic:
        outcome = pipeline.run_synthetic(
            data.root,
            seed=args.seed,
            sigma=args.sigma,
            k=args.k,
            render_keyframes=args.keyframes,
        )
    else:
        outcome = pipeline.run_artifacts(data.root, seed=args.seed, k=args.k)
    print(f"catalog: {len(outcome.catalog.ids())} videos")
    print(f"queries: {len(outcome.picks)} selected")
    for method in sorted(outcome.report):
        for task in sorted(outcome.report[method]):
            result = outcome.report[method][task]
            print(f"mAP\t{method}/{task}\t{result.map_score:.6f}")
    print(f"artifacts -> {data.root}")
    return EXIT_OK


# ----------------------------------------------------------------- serve

def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app

    data = _data_dir(args)
    port = args.port if args.port is not None else int(
        os.environ.get("FIVR_PORT", "8000")
    )
    app = build_app(data)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fivr",
        description="Fine-grained incident video retrieval toolkit.",
    )
    parser.add_argument(
        "--data", default=None, metavar="DIR",
        help="data directory (default: $FIVR_DATA_DIR or ./data)",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    ingest = commands.add_parser("ingest", help="event and catalog intake")
    ingest_sub = ingest.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    ingest_sub.required = True
    p = ingest_sub.add_parser("events", help="canonicalize an event listing")
    p.add_argument("file")
    p.set_defaults(func=cmd_ingest_events)
    p = ingest_sub.add_parser("videos", help="canonicalize a video catalog")
    p.add_argument("file")
    p.set_defaults(func=cmd_ingest_videos)
    p = ingest_sub.add_parser("filter", help="videos within an event's window")
    p.add_argument("--event", required=True, metavar="ID")
    p.set_defaults(func=cmd_ingest_filter)

    features = commands.add_parser("features", help="frame descriptors")
    features_sub = features.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    features_sub.required = True
    p = features_sub.add_parser("extract", help="descriptors from frame images")
    p.add_argument("frames_dir")
    p.add_argument("--hsv", action="store_true", help="HSV color histograms")
    p.add_argument("--lbp", action="store_true", help="local binary patterns")
    p.add_argument("--fps", type=_positive_float, default=1.0,
                   help="frame rate of the image sequence (default 1)")
    p.set_defaults(func=cmd_features_extract)
    p = features_sub.add_parser("import", help="validate and copy a descriptor file")
    p.add_argument("file")
    p.set_defaults(func=cmd_features_import)

    vocab_cmd = commands.add_parser("vocab", help="visual codebooks")
    vocab_sub = vocab_cmd.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    vocab_sub.required = True
    p = vocab_sub.add_parser("train", help="train per-channel codebooks")
    p.add_argument("--k", type=_positive_int, default=pipeline.DEFAULT_K)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_vocab_train)
    p = vocab_sub.add_parser("encode", help="encode bag-of-words vectors")
    p.add_argument("--m", type=int, choices=(1, 3), default=1,
                   help="words per frame vector (1=bow, 3=lbow)")
    p.set_defaults(func=cmd_vocab_encode)

    textsim_cmd = commands.add_parser("textsim", help="title similarity")
    textsim_sub = textsim_cmd.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    textsim_sub.required = True
    p = textsim_sub.add_parser("encode", help="tf-idf vectors from titles")
    p.add_argument("metadata", help="catalog file with titles")
    p.set_defaults(func=cmd_textsim_encode)

    index_cmd = commands.add_parser("index", help="inverted indexes")
    index_sub = index_cmd.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    index_sub.required = True
    p = index_sub.add_parser("build", help="build visual and textual indexes")
    p.add_argument("--m", type=int, choices=(1, 3), default=1,
                   help="which visual encoding to index")
    p.set_defaults(func=cmd_index_build)
    p = index_sub.add_parser("query", help="top-k lookup for a cataloged video")
    p.add_argument("video_id")
    p.add_argument("--k", type=_positive_int, default=10)
    p.add_argument("--side", choices=("visual", "textual"), default="visual")
    p.set_defaults(func=cmd_index_query)
    p = index_sub.add_parser("pairs", help="all similar pairs above a threshold")
    p.add_argument("--threshold", type=_unit_interval,
                   default=selectq.EDGE_THRESHOLD)
    p.set_defaults(func=cmd_index_pairs)

    selectq_cmd = commands.add_parser("selectq", help="query selection")
    selectq_sub = selectq_cmd.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    selectq_sub.required = True
    p = selectq_sub.add_parser("run", help="select benchmark queries")
    p.add_argument("--ts", type=_unit_interval, default=selectq.EDGE_THRESHOLD,
                   help="similarity edge threshold")
    p.add_argument("--tr", type=_unit_interval,
                   default=selectq.MIN_UPLOADER_RATIO,
                   help="minimum uploader ratio")
    p.add_argument("--td", type=_positive_int,
                   default=selectq.MAX_QUERY_DURATION_S,
                   help="maximum query duration in seconds")
    p.add_argument("--top", type=_positive_int, default=selectq.DEFAULT_TOP_N)
    p.set_defaults(func=cmd_selectq_run)

    synth_cmd = commands.add_parser("synth", help="synthetic worlds")
    synth_sub = synth_cmd.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    synth_sub.required = True
    p = synth_sub.add_parser("gen", help="generate a random scene world")
    p.add_argument("--videos", type=_positive_int, default=40)
    p.add_argument("--incidents", type=_positive_int, default=4)
    p.add_argument("--viewpoints", type=_positive_int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--sigma", type=_nonneg_float, default=0.0,
                   help="descriptor noise level")
    p.add_argument("--max-scenes", type=_positive_int, default=3)
    p.set_defaults(func=cmd_synth_gen)
    p = synth_sub.add_parser("labels", help="relation labels for the saved world")
    p.set_defaults(func=cmd_synth_labels)

    eval_cmd = commands.add_parser("eval", help="retrieval evaluation")
    eval_sub = eval_cmd.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    eval_sub.required = True
    p = eval_sub.add_parser("run", help="evaluate one method on one task")
    p.add_argument("--task", choices=tuple(sorted(evalkit.TASKS)), required=True)
    p.add_argument("--method", choices=pipeline.METHODS, required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_eval_run)

    pipeline_cmd = commands.add_parser("pipeline", help="full processing chain")
    pipeline_sub = pipeline_cmd.add_subparsers(dest="subcommand",
                                               metavar="SUBCOMMAND")
    pipeline_sub.required = True
    p = pipeline_sub.add_parser("run", help="run every stage end to end")
    p.add_argument("--synthetic", action="store_true",
                   help="generate a synthetic corpus instead of ingesting")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--sigma", type=_nonneg_float, default=0.0)
    p.add_argument("--k", type=_positive_int, default=pipeline.DEFAULT_K)
    p.add_argument("--keyframes", action="store_true",
                   help="render keyframe strips for the annotation UI")
    p.set_defaults(func=cmd_pipeline_run)

    serve_cmd = commands.add_parser("serve", help="annotation HTTP service")
    serve_cmd.add_argument("--host", default="127.0.0.1")
    serve_cmd.add_argument("--port", type=_positive_int, default=None,
                           help="default: $FIVR_PORT or 8000")
    serve_cmd.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, CatalogError, FormatError, FileNotFoundError,
            KeyError, ValueError, RuntimeError, OSError) as exc:
        print(f"fivr: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Tiny builders shared across the test modules."""

from __future__ import annotations

import datetime as dt

from fivr.ingest import Catalog, VideoRecord

UTC = dt.timezone.utc


def ts(text: str) -> dt.datetime:
    """Shorthand: ISO timestamp to an aware datetime (naive means UTC)."""
    stamp = dt.datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=UTC)
    return stamp


def make_video(
    video_id: str,
    published: str = "2017-06-01T00:00:00",
    duration: int = 60,
    uploader: str | None = None,
    title: str = "",
    event_id: str | None = None,
) -> VideoRecord:
    return VideoRecord(
        video_id=video_id,
        title=title or f"clip {video_id}",
        published_at=ts(published),
        duration_s=duration,
        uploader_id=uploader or f"u-{video_id}",
        event_id=event_id,
    )


def make_catalog(videos) -> Catalog:
    catalog = Catalog()
    for video in videos:
        catalog.add(video)
    return catalog

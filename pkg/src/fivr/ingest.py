"""Event listings and video catalogs.

Reads the two inputs everything downstream works from: a plain-text event
listing (field-named records, see :mod:`fivr.records`) and a tab-separated
video catalog.  Uploaded incident footage is matched to events by a
publication window and a duration cap before it enters the corpus.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

from .records import ParseError, decode, encode

# Event categories that describe incidents worth retrieving footage for.
RETAINED_CATEGORIES = frozenset(
    {"Armed conflicts and attacks", "Disasters and accidents"}
)

# Videos published later than this many days after the event are unrelated
# uploads that happen to mention it.
EVENT_WINDOW_DAYS = 7

# Longer uploads are compilations or streams, not incident clips.
MAX_DURATION_S = 300

_EVENT_REQUIRED = ("event_id", "headline", "date", "category")
_CATALOG_HEADER = (
    "video_id",
    "title",
    "published_at",
    "duration_s",
    "uploader_id",
    "event_id",
)


class CatalogError(ValueError):
    """Raised for a malformed or inconsistent video catalog."""


def parse_timestamp(text: str) -> dt.datetime:
    """Parse an ISO-8601 timestamp and normalize it to UTC.

    Naive timestamps are taken to already be UTC.  A trailing ``Z`` is
    accepted as an alias for ``+00:00``.
    """
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        parsed = dt.datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {text!r}: {exc}") from None
    if parsed.tzinfo is None:
        return parsed.replace(tzinfo=dt.timezone.utc)
    return parsed.astimezone(dt.timezone.utc)


def format_timestamp(value: dt.datetime) -> str:
    return value.astimezone(dt.timezone.utc).isoformat()


@dataclass(frozen=True)
class EventRecord:
    """One current-events entry: a dated incident with a category."""

    event_id: str
    headline: str
    date: dt.date
    category: str
    summary: str = ""
    source_url: str = ""


@dataclass(frozen=True)
class VideoRecord:
    """Metadata for one uploaded video, timestamps normalized to UTC."""

    video_id: str
    title: str
    published_at: dt.datetime
    duration_s: int
    uploader_id: str
    event_id: str | None = None

    def __post_init__(self):
        if self.duration_s < 0:
            raise ValueError(
                f"video {self.video_id!r}: negative duration {self.duration_s}"
            )
        if self.published_at.tzinfo is None:
            raise ValueError(f"video {self.video_id!r}: naive published_at")


@dataclass
class Catalog:
    """A keyed collection of :class:`VideoRecord`, unique by video_id."""

    videos: dict[str, VideoRecord] = field(default_factory=dict)

    def add(self, record: VideoRecord) -> None:
        if record.video_id in self.videos:
            raise CatalogError(f"duplicate video_id {record.video_id!r}")
        self.videos[record.video_id] = record

    def __len__(self) -> int:
        return len(self.videos)

    def __contains__(self, video_id: str) -> bool:
        return video_id in self.videos

    def __iter__(self):
        return iter(self.videos.values())

    def get(self, video_id: str) -> VideoRecord:
        try:
            return self.videos[video_id]
        except KeyError:
            raise CatalogError(f"unknown video_id {video_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self.videos)


def parse_event_listing(text: str) -> list[EventRecord]:
    """Parse an event listing in field-named record format.

    Raises :class:`~fivr.records.ParseError` for malformed lines and
    :class:`ValueError` naming the field for incomplete or invalid entries.
    """
    events: list[EventRecord] = []
    seen: set[str] = set()
    for raw in decode(text):
        for key in _EVENT_REQUIRED:
            if key not in raw:
                raise ValueError(
                    f"event entry missing required field {key!r}: {raw!r}"
                )
        fields = {}
        for key, value in raw.items():
            if isinstance(value, list):
                raise ValueError(f"event field {key!r} appears more than once")
            fields[key] = value
        try:
            date = dt.date.fromisoformat(fields["date"])
        except ValueError:
            raise ValueError(
                f"event {fields['event_id']!r}: bad date {fields['date']!r}"
            ) from None
        event = EventRecord(
            event_id=fields["event_id"],
            headline=fields["headline"],
            date=date,
            category=fields["category"],
            summary=fields.get("summary", ""),
            source_url=fields.get("source_url", ""),
        )
        if event.event_id in seen:
            raise ValueError(f"duplicate event_id {event.event_id!r}")
        seen.add(event.event_id)
        events.append(event)
    return events


def format_event_listing(events: list[EventRecord]) -> str:
    """Serialize events to the fixture format, fields in canonical order."""
    rows: list[dict[str, str | list[str]]] = []
    for event in events:
        row: dict[str, str | list[str]] = {
            "event_id": event.event_id,
            "headline": event.headline,
            "date": event.date.isoformat(),
            "category": event.category,
        }
        if event.summary:
            row["summary"] = event.summary
        if event.source_url:
            row["source_url"] = event.source_url
        rows.append(row)
    return encode(rows)


def filter_events(events: list[EventRecord]) -> list[EventRecord]:
    """Keep only events in the retained incident categories."""
    return [e for e in events if e.category in RETAINED_CATEGORIES]


def filter_videos_for_event(
    event: EventRecord, videos: list[VideoRecord]
) -> list[VideoRecord]:
    """Keep videos plausibly showing the event.

    A video survives if its UTC publication day falls between the event
    date and seven days after it (both inclusive) and it runs at most
    five minutes.  Order is preserved.
    """
    last_day = event.date + dt.timedelta(days=EVENT_WINDOW_DAYS)
    kept = []
    for video in videos:
        day = video.published_at.astimezone(dt.timezone.utc).date()
        if event.date <= day <= last_day and video.duration_s <= MAX_DURATION_S:
            kept.append(video)
    return kept


def load_catalog(path) -> Catalog:
    """Load a tab-separated catalog file into a :class:`Catalog`.

    The file must start with the canonical header line.  Errors name the
    offending line.  An empty ``event_id`` column means the video is not
    tied to an event.
    """
    catalog = Catalog()
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise CatalogError(f"{path}: empty catalog file")
    header = tuple(lines[0].split("\t"))
    if header != _CATALOG_HEADER:
        raise CatalogError(
            f"{path}: bad header {header!r}, expected {_CATALOG_HEADER!r}"
        )
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != len(_CATALOG_HEADER):
            raise CatalogError(
                f"{path}: line {line_no}: expected {len(_CATALOG_HEADER)} "
                f"columns, got {len(cells)}"
            )
        video_id, title, published_at, duration_s, uploader_id, event_id = cells
        try:
            record = VideoRecord(
                video_id=video_id,
                title=title,
                published_at=parse_timestamp(published_at),
                duration_s=int(duration_s),
                uploader_id=uploader_id,
                event_id=event_id or None,
            )
        except ValueError as exc:
            raise CatalogError(f"{path}: line {line_no}: {exc}") from None
        try:
            catalog.add(record)
        except CatalogError as exc:
            raise CatalogError(f"{path}: line {line_no}: {exc}") from None
    return catalog


def write_catalog(catalog: Catalog, path) -> None:
    """Write a catalog as TSV with the canonical header, sorted by id."""
    lines = ["\t".join(_CATALOG_HEADER)]
    for video_id in catalog.ids():
        video = catalog.videos[video_id]
        for cell in (video.video_id, video.title, video.uploader_id):
            if "\t" in cell or "\n" in cell:
                raise CatalogError(
                    f"video {video.video_id!r}: field contains tab or newline"
                )
        lines.append(
            "\t".join(
                (
                    video.video_id,
                    video.title,
                    format_timestamp(video.published_at),
                    str(video.duration_s),
                    video.uploader_id,
                    video.event_id or "",
                )
            )
        )
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")

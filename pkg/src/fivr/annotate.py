"""The three-phase annotation protocol.

Annotators label candidates for one query in a fixed order: first the
visual ranking, then the textual ranking minus anything already seen,
then a merged pool of the remaining candidates published within a week
of the query, ordered by averaged visual-textual similarity.  The visual
and textual phases stop after 100 consecutive distinct-video labels
since the last relevant one, or after 1000 labels in the phase,
whichever comes first; the merged phase has no cap and runs to the
100-streak or exhaustion.

Every label is an event; a session is a pure fold over its event log,
so replaying the log reproduces the session state exactly.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from enum import Enum

from .ingest import Catalog, format_timestamp, parse_timestamp

LABELS = ("ND", "DS", "CS", "IS", "DI")

IRRELEVANT_STOP = 100
PHASE_CAP = 1000
MERGED_WINDOW = dt.timedelta(days=7)

ANNOTATION_HEADER = ("query_id", "video_id", "label", "timestamp")


class Phase(Enum):
    VISUAL = "visual"
    TEXTUAL = "textual"
    MERGED = "merged"
    DONE = "done"


@dataclass(frozen=True)
class AnnotationEvent:
    """One recorded label."""

    session_id: str
    video_id: str
    label: str
    at: dt.datetime


def _check_ranking(name: str, ranking, query_id: str) -> None:
    seen = set()
    previous = None
    for video_id, score in ranking:
        if video_id == query_id:
            raise ValueError(f"{name} ranking contains the query itself")
        if video_id in seen:
            raise ValueError(f"{name} ranking repeats {video_id!r}")
        seen.add(video_id)
        if previous is not None and score > previous:
            raise ValueError(f"{name} ranking is not sorted by score")
        previous = score


@dataclass
class AnnotationSession:
    """Mutable state of one query's annotation pass."""

    session_id: str
    query_id: str
    query_published_at: dt.datetime
    visual_ranking: tuple
    textual_ranking: tuple
    published: dict
    phase: Phase = Phase.VISUAL
    queue: tuple = ()
    cursor: int = 0
    pending: "str | None" = None
    labels: dict = field(default_factory=dict)
    irrelevant_streak: int = 0
    phase_count: int = 0
    events: list = field(default_factory=list)

    def progress(self) -> dict:
        return {
            "phase": self.phase.value,
            "annotated": len(self.labels),
            "phase_annotated": self.phase_count,
            "irrelevant_streak": self.irrelevant_streak,
            "queue_remaining": max(0, len(self.queue) - self.cursor),
        }


def create_session(
    session_id: str,
    query_id: str,
    visual_ranking,
    textual_ranking,
    catalog: Catalog,
) -> AnnotationSession:
    """Start a session from the two rankings.

    Rankings are (video_id, score) pairs sorted by descending score and
    must not contain the query.  Publication times for every candidate
    come from the catalog up front, so later phases never need it.
    """
    if not session_id or any(c.isspace() for c in session_id):
        raise ValueError(f"bad session id {session_id!r}")
    visual = tuple((str(v), float(s)) for v, s in visual_ranking)
    textual = tuple((str(v), float(s)) for v, s in textual_ranking)
    _check_ranking("visual", visual, query_id)
    _check_ranking("textual", textual, query_id)
    published = {}
    for video_id, _ in visual + textual:
        published[video_id] = catalog.get(video_id).published_at
    return AnnotationSession(
        session_id=session_id,
        query_id=query_id,
        query_published_at=catalog.get(query_id).published_at,
        visual_ranking=visual,
        textual_ranking=textual,
        published=published,
        queue=tuple(video_id for video_id, _ in visual),
    )


def _merged_queue(session: AnnotationSession) -> tuple:
    """Remaining candidates near the query's publication date, ordered by
    averaged similarity; a side missing a candidate scores zero there."""
    visual = dict(session.visual_ranking)
    textual = dict(session.textual_ranking)
    remaining = [
        video_id
        for video_id in set(visual) | set(textual)
        if video_id not in session.labels
        and abs(session.published[video_id] - session.query_published_at)
        <= MERGED_WINDOW
    ]
    remaining.sort(
        key=lambda vid: (
            -(visual.get(vid, 0.0) + textual.get(vid, 0.0)) / 2.0,
            vid,
        )
    )
    return tuple(remaining)


def _advance_phase(session: AnnotationSession) -> None:
    if session.phase is Phase.VISUAL:
        session.phase = Phase.TEXTUAL
        session.queue = tuple(
            video_id
            for video_id, _ in session.textual_ranking
            if video_id not in session.labels
        )
    elif session.phase is Phase.TEXTUAL:
        session.phase = Phase.MERGED
        session.queue = _merged_queue(session)
    else:
        session.phase = Phase.DONE
        session.queue = ()
    session.cursor = 0
    session.irrelevant_streak = 0
    session.phase_count = 0


def next_candidate(session: AnnotationSession) -> "str | None":
    """The video to label next, or None once the session is done.

    Phase stopping rules apply here: a phase ends on a 100-long streak of
    distinct-video labels, on the 1000-label phase cap (visual and
    textual only), or when its queue runs out.
    """
    while True:
        if session.phase is Phase.DONE:
            return None
        if session.pending is not None:
            return session.pending
        stop = (
            session.irrelevant_streak >= IRRELEVANT_STOP
            or session.cursor >= len(session.queue)
        )
        if session.phase in (Phase.VISUAL, Phase.TEXTUAL):
            stop = stop or session.phase_count >= PHASE_CAP
        if stop:
            _advance_phase(session)
            continue
        session.pending = session.queue[session.cursor]
        return session.pending


def record_label(
    session: AnnotationSession,
    video_id: str,
    label: str,
    at: "dt.datetime | None" = None,
) -> AnnotationEvent:
    """Label the pending candidate and advance the session.

    ``video_id`` must be exactly what :func:`next_candidate` returned; a
    distinct-video label extends the irrelevant streak, anything else
    resets it.
    """
    if label not in LABELS:
        raise ValueError(f"unknown label {label!r}")
    expected = next_candidate(session)
    if expected is None:
        raise ValueError(f"session {session.session_id!r} is already done")
    if video_id != expected:
        raise ValueError(
            f"out-of-order label: expected {expected!r}, got {video_id!r}"
        )
    if at is None:
        at = dt.datetime.now(dt.timezone.utc)
    elif at.tzinfo is None:
        raise ValueError("event timestamps must be timezone-aware")
    session.labels[video_id] = label
    session.phase_count += 1
    if label == "DI":
        session.irrelevant_streak += 1
    else:
        session.irrelevant_streak = 0
    session.pending = None
    session.cursor += 1
    event = AnnotationEvent(
        session_id=session.session_id, video_id=video_id, label=label, at=at
    )
    session.events.append(event)
    return event


def append_event(path, event: AnnotationEvent) -> None:
    """Append one event line: session, video, label, time."""
    line = "\t".join(
        (event.session_id, event.video_id, event.label, format_timestamp(event.at))
    )
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(line + "\n")


def read_event_log(path) -> list[AnnotationEvent]:
    events = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 4:
                raise ValueError(f"{path}: line {line_no}: expected 4 fields")
            session_id, video_id, label, stamp = cells
            events.append(AnnotationEvent(
                session_id=session_id,
                video_id=video_id,
                label=label,
                at=parse_timestamp(stamp),
            ))
    return events


def replay_events(
    session: AnnotationSession, events: list[AnnotationEvent]
) -> AnnotationSession:
    """Re-apply logged events to a fresh session, restoring its state."""
    for event in events:
        if event.session_id != session.session_id:
            raise ValueError(
                f"event for session {event.session_id!r} replayed into "
                f"{session.session_id!r}"
            )
        record_label(session, event.video_id, event.label, at=event.at)
    return session


def export_annotations(sessions) -> list[tuple]:
    """Flatten sessions to (query_id, video_id, label, time) rows.

    Distinct-video rows are included; filter them out downstream when only
    relevant pairs matter.
    """
    rows = []
    for session in sessions:
        for event in session.events:
            rows.append((session.query_id, event.video_id, event.label, event.at))
    return rows


def write_annotation_table(rows, path) -> None:
    lines = ["\t".join(ANNOTATION_HEADER)]
    for query_id, video_id, label, at in rows:
        if label not in LABELS:
            raise ValueError(f"unknown label {label!r}")
        lines.append(
            "\t".join((query_id, video_id, label, format_timestamp(at)))
        )
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def read_annotation_table(path) -> list[tuple]:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != ANNOTATION_HEADER:
        raise ValueError(f"{path}: missing annotation table header")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 4:
            raise ValueError(f"{path}: line {line_no}: expected 4 columns")
        query_id, video_id, label, stamp = cells
        if label not in LABELS:
            raise ValueError(f"{path}: line {line_no}: unknown label {label!r}")
        rows.append((query_id, video_id, label, parse_timestamp(stamp)))
    return rows


def truth_map(rows, include_distractors: bool = True) -> dict:
    """Collapse annotation rows to a (query, video) -> label map."""
    truth = {}
    for query_id, video_id, label, _ in rows:
        if not include_distractors and label == "DI":
            continue
        truth[(query_id, video_id)] = label
    return truth

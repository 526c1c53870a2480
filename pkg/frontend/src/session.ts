/**
 * Session state machine.
 *
 * Holds everything the screen shows for one annotation session and
 * drives it through the /v1 API.  Two rules shape the design:
 *
 *  - The rendered phase and progress always come from the last server
 *    response; nothing here invents or extrapolates a count.
 *  - The view never advances past a candidate without a server
 *    acknowledgement of its label.  A submission that cannot reach the
 *    server is parked in the offline queue under its request token and
 *    replayed later; the token keeps delivery exactly-once.
 */

import { ApiClient, ApiError, newRequestToken, parseCount, parseScore } from './api.js';
import { Label } from './labels.js';
import { LabelQueue } from './queue.js';
import { many, one, RecordData } from './records.js';

export interface Progress {
  phase: string;
  annotated: number;
  phaseAnnotated: number;
  irrelevantStreak: number;
  queueRemaining: number;
}

export interface VideoView {
  videoId: string;
  title: string;
  publishedAt: string;
  durationS: string;
  uploaderId: string;
  keyframes: string[];
}

export interface CandidateView extends VideoView {
  visualScore: number;
  textualScore: number;
}

export interface HistoryEntry {
  videoId: string;
  label: Label;
}

export interface SessionViewState {
  sessionId: string | null;
  queryId: string | null;
  /** Mirror of the last ticket the server sent. */
  progress: Progress | null;
  query: VideoView | null;
  candidate: CandidateView | null;
  done: boolean;
  history: HistoryEntry[];
  /** Failure notice with a retry affordance; null when all is well. */
  banner: string | null;
  queuedCount: number;
  busy: boolean;
}

export function parseProgress(record: RecordData): Progress {
  return {
    phase: one(record, 'phase'),
    annotated: parseCount(record, 'annotated'),
    phaseAnnotated: parseCount(record, 'phase_annotated'),
    irrelevantStreak: parseCount(record, 'irrelevant_streak'),
    queueRemaining: parseCount(record, 'queue_remaining'),
  };
}

export function parseVideo(record: RecordData): VideoView {
  return {
    videoId: one(record, 'video_id'),
    title: one(record, 'title'),
    publishedAt: one(record, 'published_at'),
    durationS: one(record, 'duration_s'),
    uploaderId: one(record, 'uploader_id'),
    keyframes: many(record, 'keyframe'),
  };
}

type Intent =
  | { kind: 'open'; queryId: string; token: string }
  | { kind: 'resume'; sessionId: string };

export type TokenSource = () => string;

export class SessionController {
  private readonly api: ApiClient;
  private readonly queue: LabelQueue;
  private readonly onChange: (view: SessionViewState) => void;
  private readonly tokens: TokenSource;

  private state: SessionViewState;
  /** Token bound to the current candidate; reset when the candidate changes. */
  private pendingToken: string | null = null;
  private inflight: Promise<void> | null = null;
  private intent: Intent | null = null;

  constructor(
    api: ApiClient,
    queue: LabelQueue,
    onChange: (view: SessionViewState) => void,
    tokens: TokenSource = newRequestToken,
  ) {
    this.api = api;
    this.queue = queue;
    this.onChange = onChange;
    this.tokens = tokens;
    this.state = {
      sessionId: null,
      queryId: null,
      progress: null,
      query: null,
      candidate: null,
      done: false,
      history: [],
      banner: null,
      queuedCount: queue.size,
      busy: false,
    };
  }

  current(): SessionViewState {
    return this.snapshot();
  }

  private snapshot(): SessionViewState {
    const { query, candidate, progress, history } = this.state;
    return {
      ...this.state,
      progress: progress === null ? null : { ...progress },
      query: query === null ? null : { ...query, keyframes: [...query.keyframes] },
      candidate:
        candidate === null ? null : { ...candidate, keyframes: [...candidate.keyframes] },
      history: history.map((entry) => ({ ...entry })),
    };
  }

  private emit(): void {
    this.onChange(this.snapshot());
  }

  /**
   * Open a fresh session for a query.  The create token survives a
   * failed attempt, so retrying lands on the same session instead of
   * minting a duplicate.
   */
  async open(queryId: string): Promise<void> {
    if (this.intent === null || this.intent.kind !== 'open' || this.intent.queryId !== queryId) {
      this.intent = { kind: 'open', queryId, token: this.tokens() };
    }
    const intent = this.intent;
    this.state.busy = true;
    this.emit();
    try {
      const query = parseVideo(await this.api.getVideo(queryId));
      const ticket = await this.api.createSession(queryId, intent.token);
      this.adoptTicket(ticket);
      this.state.query = query;
      this.state.history = [];
      this.state.banner = null;
      this.emit();
      this.intent = null;
      await this.fetchNext();
    } catch (error) {
      this.fail(error, 'could not open the session');
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  /** Reattach to an existing session, e.g. from the session list. */
  async resume(sessionId: string): Promise<void> {
    this.intent = { kind: 'resume', sessionId };
    this.state.busy = true;
    this.emit();
    try {
      const ticket = await this.api.getProgress(sessionId);
      this.adoptTicket(ticket);
      this.state.query = parseVideo(await this.api.getVideo(this.state.queryId as string));
      this.state.history = [];
      this.state.banner = null;
      this.emit();
      this.intent = null;
      await this.fetchNext();
    } catch (error) {
      this.fail(error, 'could not resume the session');
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  private adoptTicket(ticket: RecordData): void {
    this.state.sessionId = one(ticket, 'session_id');
    this.state.queryId = one(ticket, 'query_id');
    this.state.progress = parseProgress(ticket);
    this.state.done = one(ticket, 'phase') === 'done';
    this.state.candidate = null;
    this.pendingToken = null;
  }

  /**
   * Pull the current candidate (or the done ticket).  On failure the
   * candidate, progress, and history stay exactly as they were; only
   * the banner changes.
   */
  async fetchNext(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) {
      return;
    }
    try {
      const record = await this.api.nextCandidate(sessionId);
      this.state.progress = parseProgress(record);
      if (one(record, 'status') === 'done') {
        this.state.done = true;
        this.state.candidate = null;
        this.pendingToken = null;
      } else {
        const video = parseVideo(record);
        if (this.state.candidate === null || this.state.candidate.videoId !== video.videoId) {
          // A new candidate gets a fresh token on its first submission;
          // the same candidate coming back (e.g. after an offline spell)
          // keeps its token so replays stay deduplicatable.
          this.pendingToken = null;
        }
        this.state.candidate = {
          ...video,
          visualScore: parseScore(record, 'visual_score'),
          textualScore: parseScore(record, 'textual_score'),
        };
        this.state.done = false;
      }
      this.state.banner = null;
      this.emit();
    } catch (error) {
      this.fail(error, 'could not load the next candidate');
    }
  }

  /**
   * Submit a label for the current candidate.
   *
   * A double press while the first submission is in flight coalesces
   * into that submission (same request token, one POST).  On the
   * server's acknowledgement the progress mirror updates from the ack
   * itself, then the next candidate is fetched.  A transport failure
   * parks the label in the offline queue; the candidate stays on
   * screen.
   */
  submit(label: Label): Promise<void> {
    const { sessionId, candidate, done } = this.state;
    if (sessionId === null || candidate === null || done) {
      return Promise.resolve();
    }
    if (this.inflight !== null) {
      return this.inflight;
    }
    if (this.state.busy) {
      // A replay or resync is mid-flight; labeling now could race it.
      return Promise.resolve();
    }
    if (this.queue.has(sessionId, candidate.videoId)) {
      // Already parked for replay; further presses would change nothing.
      return Promise.resolve();
    }
    const videoId = candidate.videoId;
    if (this.pendingToken === null) {
      this.pendingToken = this.tokens();
    }
    const token = this.pendingToken;
    const work = (async () => {
      this.state.busy = true;
      this.emit();
      try {
        const ack = await this.api.postLabel(sessionId, videoId, label, token);
        this.state.progress = parseProgress(ack);
        this.state.history.push({ videoId, label });
        this.state.banner = null;
        this.pendingToken = null;
        this.emit();
        await this.fetchNext();
      } catch (error) {
        if (error instanceof ApiError) {
          // The server refused the label; queueing would not help.
          this.state.banner = error.message;
          this.emit();
        } else {
          this.queue.push({ sessionId, videoId, label, token });
          this.state.queuedCount = this.queue.size;
          this.state.banner = 'offline: label queued, will replay when the connection returns';
          this.emit();
        }
      } finally {
        this.state.busy = false;
        this.inflight = null;
        this.emit();
      }
    })();
    this.inflight = work;
    return work;
  }

  /**
   * Replay queued labels, oldest first, then resync the candidate.
   * Each replay reuses its original request token, so a label that
   * already reached the server is absorbed by the token journal rather
   * than applied twice.
   */
  async goOnline(): Promise<void> {
    if (this.queue.size === 0) {
      if (this.state.banner !== null) {
        await this.retry();
      }
      return;
    }
    this.state.busy = true;
    this.emit();
    try {
      await this.queue.flush(async (entry) => {
        const ack = await this.api.postLabel(
          entry.sessionId,
          entry.videoId,
          entry.label,
          entry.token,
        );
        if (entry.sessionId === this.state.sessionId) {
          this.state.progress = parseProgress(ack);
          this.state.history.push({ videoId: entry.videoId, label: entry.label });
        }
        // The acked entry leaves the queue right after this returns.
        this.state.queuedCount = Math.max(0, this.queue.size - 1);
        this.emit();
      });
      this.state.queuedCount = this.queue.size;
      this.state.banner = null;
      this.emit();
      if (this.state.sessionId !== null && !this.state.done) {
        await this.fetchNext();
      }
    } catch (error) {
      this.state.queuedCount = this.queue.size;
      this.fail(error, 'replay interrupted, labels still queued');
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  /** Re-run whatever last failed: queued labels first, then the session itself. */
  async retry(): Promise<void> {
    if (this.queue.size > 0) {
      return this.goOnline();
    }
    if (this.state.sessionId === null) {
      const intent = this.intent;
      if (intent === null) {
        return;
      }
      if (intent.kind === 'open') {
        return this.open(intent.queryId);
      }
      return this.resume(intent.sessionId);
    }
    return this.fetchNext();
  }

  private fail(error: unknown, fallback: string): void {
    if (error instanceof ApiError) {
      this.state.banner = error.message;
    } else {
      this.state.banner = `${fallback} (connection failed)`;
    }
    this.emit();
  }
}

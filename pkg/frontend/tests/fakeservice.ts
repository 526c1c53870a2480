/**
 * In-memory stand-in for the annotation service, speaking the same
 * record wire format over an injectable fetcher.  It reproduces the
 * protocol mechanics the UI depends on: ranked phases, the pending
 * candidate rule, label counting, the irrelevant streak, and the
 * request-token journals that make create and label idempotent.
 *
 * Fault injection wraps the fetcher: 'refuse' fails before the server
 * sees the request, 'drop-ack' lets the server apply the request and
 * then loses the response, which is the case token dedup exists for.
 */

import type { Fetcher } from '../src/api.js';
import { MEDIA_TYPE } from '../src/api.js';
import { decode, encode, RecordData } from '../src/records.js';

export interface FakeVideo {
  videoId: string;
  title: string;
  publishedAt: string;
  durationS: string;
  uploaderId: string;
  keyframes: string[];
}

export function fakeVideo(videoId: string, overrides: Partial<FakeVideo> = {}): FakeVideo {
  return {
    videoId,
    title: `video ${videoId}`,
    publishedAt: '2017-06-10T12:00:00+00:00',
    durationS: '61.0',
    uploaderId: `u_${videoId}`,
    keyframes: [],
    ...overrides,
  };
}

type PhaseName = 'visual' | 'textual' | 'merged' | 'done';

const PHASE_ORDER: PhaseName[] = ['visual', 'textual', 'merged', 'done'];

interface FakeSession {
  sessionId: string;
  queryId: string;
  phase: PhaseName;
  queues: Record<'visual' | 'textual' | 'merged', string[]>;
  pending: string | null;
  labels: Map<string, string>;
  irrelevantStreak: number;
  phaseCount: number;
  tokens: Map<string, { videoId: string; label: string }>;
}

interface Ranking {
  visual: [string, number][];
  textual: [string, number][];
}

class HttpFailure extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class FakeService {
  readonly videos = new Map<string, FakeVideo>();
  queries: string[] = [];
  private readonly rankings = new Map<string, Ranking>();
  readonly sessions = new Map<string, FakeSession>();
  private readonly createTokens = new Map<string, string>();
  /** `${sessionId}/${videoId}` -> times a label was actually applied. */
  readonly applied = new Map<string, number>();
  /** Requests seen per endpoint kind, journal replays included. */
  readonly counts = { queries: 0, video: 0, create: 0, next: 0, label: 0, progress: 0 };

  addVideo(video: FakeVideo): void {
    this.videos.set(video.videoId, video);
  }

  setRanking(queryId: string, visual: [string, number][], textual: [string, number][]): void {
    this.rankings.set(queryId, { visual, textual });
  }

  session(sessionId: string): FakeSession {
    const session = this.sessions.get(sessionId);
    if (session === undefined) {
      throw new HttpFailure(404, `unknown session '${sessionId}'`);
    }
    return session;
  }

  appliedCount(sessionId: string, videoId: string): number {
    return this.applied.get(`${sessionId}/${videoId}`) ?? 0;
  }

  // ------------------------------------------------------------ records

  private videoRecord(videoId: string): RecordData {
    const video = this.videos.get(videoId);
    if (video === undefined) {
      throw new HttpFailure(404, `unknown video '${videoId}'`);
    }
    const record: RecordData = {
      video_id: video.videoId,
      title: video.title,
      published_at: video.publishedAt,
      duration_s: video.durationS,
      uploader_id: video.uploaderId,
    };
    if (video.keyframes.length > 0) {
      record.keyframe = video.keyframes.map(
        (name) => `/v1/keyframes/${video.videoId}/${name}`,
      );
    }
    return record;
  }

  private remaining(session: FakeSession): number {
    if (session.phase === 'done') {
      return 0;
    }
    return session.queues[session.phase].filter((id) => !session.labels.has(id)).length;
  }

  private ticketRecord(session: FakeSession): RecordData {
    return {
      session_id: session.sessionId,
      query_id: session.queryId,
      phase: session.phase,
      annotated: String(session.labels.size),
      phase_annotated: String(session.phaseCount),
      irrelevant_streak: String(session.irrelevantStreak),
      queue_remaining: String(this.remaining(session)),
    };
  }

  // --------------------------------------------------------- operations

  private createSession(queryId: string, token: string | undefined): FakeSession {
    if (!this.videos.has(queryId)) {
      throw new HttpFailure(404, `unknown video '${queryId}'`);
    }
    if (token !== undefined && this.createTokens.has(token)) {
      return this.session(this.createTokens.get(token) as string);
    }
    const ranking = this.rankings.get(queryId) ?? { visual: [], textual: [] };
    const visual = ranking.visual.map(([id]) => id);
    const textual = ranking.textual.map(([id]) => id);
    const merged = [...visual];
    for (const id of textual) {
      if (!merged.includes(id)) {
        merged.push(id);
      }
    }
    const session: FakeSession = {
      sessionId: `s${String(this.sessions.size + 1).padStart(4, '0')}`,
      queryId,
      phase: 'visual',
      queues: { visual, textual, merged },
      pending: null,
      labels: new Map(),
      irrelevantStreak: 0,
      phaseCount: 0,
      tokens: new Map(),
    };
    this.sessions.set(session.sessionId, session);
    if (token !== undefined) {
      this.createTokens.set(token, session.sessionId);
    }
    return session;
  }

  private nextCandidate(session: FakeSession): string | null {
    while (session.phase !== 'done') {
      const unlabeled = session.queues[session.phase].find((id) => !session.labels.has(id));
      if (unlabeled !== undefined) {
        session.pending = unlabeled;
        return unlabeled;
      }
      session.phase = PHASE_ORDER[PHASE_ORDER.indexOf(session.phase) + 1];
      session.phaseCount = 0;
      session.irrelevantStreak = 0;
    }
    session.pending = null;
    return null;
  }

  private recordLabel(session: FakeSession, videoId: string, label: string, token: string): void {
    const journaled = session.tokens.get(token);
    if (journaled !== undefined) {
      if (journaled.videoId !== videoId || journaled.label !== label) {
        throw new HttpFailure(409, 'request token reused with a different payload');
      }
      return;
    }
    if (session.phase === 'done') {
      throw new HttpFailure(409, 'session is done');
    }
    if (session.pending !== videoId) {
      throw new HttpFailure(409, `out-of-order label for '${videoId}'`);
    }
    session.labels.set(videoId, label);
    session.phaseCount += 1;
    session.irrelevantStreak = label === 'DI' ? session.irrelevantStreak + 1 : 0;
    session.pending = null;
    session.tokens.set(token, { videoId, label });
    const key = `${session.sessionId}/${videoId}`;
    this.applied.set(key, (this.applied.get(key) ?? 0) + 1);
  }

  // ------------------------------------------------------------ routing

  private respond(records: RecordData[], status = 200): Response {
    return new Response(encode(records), {
      status,
      headers: { 'Content-Type': MEDIA_TYPE },
    });
  }

  private parseBody(init: RequestInit | undefined): RecordData {
    if (init === undefined || typeof init.body !== 'string') {
      throw new HttpFailure(400, 'missing request body');
    }
    const records = decode(init.body);
    if (records.length !== 1) {
      throw new HttpFailure(400, `expected exactly 1 record, got ${records.length}`);
    }
    return records[0];
  }

  private field(record: RecordData, key: string): string {
    const value = record[key];
    if (value === undefined || Array.isArray(value)) {
      throw new HttpFailure(400, `missing field '${key}'`);
    }
    return value;
  }

  handle(url: string, init?: RequestInit): Response {
    try {
      return this.route(url, init);
    } catch (error) {
      if (error instanceof HttpFailure) {
        return this.respond([{ error: error.message }], error.status);
      }
      throw error;
    }
  }

  private route(url: string, init?: RequestInit): Response {
    const method = init?.method ?? 'GET';
    let match: RegExpMatchArray | null;
    if (url === '/v1/queries' && method === 'GET') {
      this.counts.queries += 1;
      return this.respond(
        this.queries.map((queryId, at) => ({
          rank: String(at + 1),
          ...this.videoRecord(queryId),
        })),
      );
    }
    if ((match = url.match(/^\/v1\/videos\/([^/]+)$/)) && method === 'GET') {
      this.counts.video += 1;
      return this.respond([this.videoRecord(match[1])]);
    }
    if (url === '/v1/sessions' && method === 'GET') {
      const ids = [...this.sessions.keys()].sort();
      return this.respond(ids.map((id) => this.ticketRecord(this.session(id))));
    }
    if (url === '/v1/sessions' && method === 'POST') {
      this.counts.create += 1;
      const body = this.parseBody(init);
      const queryId = this.field(body, 'query_id');
      const token = typeof body.request_token === 'string' ? body.request_token : undefined;
      const session = this.createSession(queryId, token);
      return this.respond([this.ticketRecord(session)], 201);
    }
    if ((match = url.match(/^\/v1\/sessions\/([^/]+)\/next$/)) && method === 'GET') {
      this.counts.next += 1;
      const session = this.session(match[1]);
      const candidate = this.nextCandidate(session);
      if (candidate === null) {
        return this.respond([{ status: 'done', ...this.ticketRecord(session) }]);
      }
      const ranking = this.rankings.get(session.queryId) ?? { visual: [], textual: [] };
      const score = (pairs: [string, number][]) =>
        String(pairs.find(([id]) => id === candidate)?.[1] ?? 0.0);
      return this.respond([
        {
          status: 'pending',
          ...this.videoRecord(candidate),
          visual_score: score(ranking.visual),
          textual_score: score(ranking.textual),
          ...this.ticketRecord(session),
        },
      ]);
    }
    if ((match = url.match(/^\/v1\/sessions\/([^/]+)\/label$/)) && method === 'POST') {
      this.counts.label += 1;
      const session = this.session(match[1]);
      const body = this.parseBody(init);
      const videoId = this.field(body, 'video_id');
      const label = this.field(body, 'label');
      const token = this.field(body, 'request_token');
      this.recordLabel(session, videoId, label, token);
      return this.respond([
        { status: 'ok', video_id: videoId, label, ...this.ticketRecord(session) },
      ]);
    }
    if ((match = url.match(/^\/v1\/sessions\/([^/]+)\/progress$/)) && method === 'GET') {
      this.counts.progress += 1;
      return this.respond([this.ticketRecord(this.session(match[1]))]);
    }
    throw new HttpFailure(404, `no route for ${method} ${url}`);
  }
}

export type Fault = 'ok' | 'refuse' | 'drop-ack';

/**
 * Wrap the fake service as a Fetcher with scripted faults.  'refuse'
 * throws before the service sees the request; 'drop-ack' lets the
 * service handle it, then throws anyway, simulating a response lost in
 * transit after the server applied the change.
 */
export function faultyFetcher(
  service: FakeService,
  script: (url: string, init?: RequestInit) => Fault,
): Fetcher {
  return async (url, init) => {
    const fault = script(url, init);
    if (fault === 'refuse') {
      throw new TypeError('fetch failed');
    }
    const response = service.handle(url, init);
    if (fault === 'drop-ack') {
      throw new TypeError('fetch failed');
    }
    return response;
  };
}

export function healthyFetcher(service: FakeService): Fetcher {
  return faultyFetcher(service, () => 'ok');
}

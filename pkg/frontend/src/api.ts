/**
 * Typed client for the /v1 annotation service.
 *
 * Every request and response body is field-named record text; this
 * module owns the encoding, decoding, and error mapping so the rest of
 * the app works with plain objects.  The fetch implementation is
 * injectable for tests.
 */

import { decode, encode, one, RecordData } from './records.js';

export type Fetcher = (url: string, init?: RequestInit) => Promise<Response>;

export const MEDIA_TYPE = 'text/plain; charset=utf-8';

/**
 * A failure the server reported: carries the HTTP status and the
 * server's error message.  Transport failures (network down, connection
 * refused) are NOT ApiErrors; they surface as whatever fetch threw.
 */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
  }
}

/** Fresh token for an idempotent mutating request. */
export function newRequestToken(): string {
  if (typeof crypto !== 'undefined' && typeof crypto.randomUUID === 'function') {
    return crypto.randomUUID();
  }
  // Fallback for ancient browsers: not cryptographic, just collision-unlikely.
  let token = '';
  for (let i = 0; i < 4; i++) {
    token += Math.floor(Math.random() * 0xffffffff).toString(16).padStart(8, '0');
  }
  return token;
}

async function readRecords(response: Response): Promise<RecordData[]> {
  const text = await response.text();
  if (!response.ok) {
    let message = `HTTP ${response.status}`;
    try {
      const records = decode(text);
      if (records.length > 0 && typeof records[0].error === 'string') {
        message = records[0].error;
      }
    } catch {
      // Unparseable error body: keep the status-line message.
    }
    throw new ApiError(response.status, message);
  }
  return decode(text);
}

function onlyRecord(records: RecordData[]): RecordData {
  if (records.length !== 1) {
    throw new Error(`expected exactly 1 record, got ${records.length}`);
  }
  return records[0];
}

export class ApiClient {
  private readonly base: string;
  private readonly fetcher: Fetcher;

  constructor(options: { base?: string; fetcher?: Fetcher } = {}) {
    this.base = options.base ?? '';
    this.fetcher = options.fetcher ?? ((url, init) => fetch(url, init));
  }

  private async get(path: string): Promise<RecordData[]> {
    const response = await this.fetcher(this.base + path);
    return readRecords(response);
  }

  private async post(path: string, record: RecordData): Promise<RecordData[]> {
    const response = await this.fetcher(this.base + path, {
      method: 'POST',
      headers: { 'Content-Type': MEDIA_TYPE },
      body: encode([record]),
    });
    return readRecords(response);
  }

  /** Ranked query list; one record per query with its catalog fields. */
  async getQueries(): Promise<RecordData[]> {
    return this.get('/v1/queries');
  }

  async getVideo(videoId: string): Promise<RecordData> {
    return onlyRecord(await this.get(`/v1/videos/${videoId}`));
  }

  async listSessions(): Promise<RecordData[]> {
    return this.get('/v1/sessions');
  }

  /**
   * Open a session for a query.  The token makes the create idempotent:
   * retrying with the same token returns the same session.
   */
  async createSession(queryId: string, token: string): Promise<RecordData> {
    return onlyRecord(
      await this.post('/v1/sessions', { query_id: queryId, request_token: token }),
    );
  }

  /** Current candidate (status pending) or the end of the session (status done). */
  async nextCandidate(sessionId: string): Promise<RecordData> {
    return onlyRecord(await this.get(`/v1/sessions/${sessionId}/next`));
  }

  /**
   * Submit one label.  The token dedups retries: the server applies a
   * given token at most once and replays its stored outcome after that.
   */
  async postLabel(
    sessionId: string,
    videoId: string,
    label: string,
    token: string,
  ): Promise<RecordData> {
    return onlyRecord(
      await this.post(`/v1/sessions/${sessionId}/label`, {
        video_id: videoId,
        label,
        request_token: token,
      }),
    );
  }

  async getProgress(sessionId: string): Promise<RecordData> {
    return onlyRecord(await this.get(`/v1/sessions/${sessionId}/progress`));
  }

  /** Ticket field helper: absolute URL for a keyframe path from a record. */
  keyframeUrl(path: string): string {
    return this.base + path;
  }
}

export function parseCount(record: RecordData, key: string): number {
  const raw = one(record, key);
  const value = Number.parseInt(raw, 10);
  if (Number.isNaN(value)) {
    throw new Error(`field ${JSON.stringify(key)} is not a count: ${JSON.stringify(raw)}`);
  }
  return value;
}

export function parseScore(record: RecordData, key: string): number {
  const raw = one(record, key);
  const value = Number.parseFloat(raw);
  if (Number.isNaN(value)) {
    throw new Error(`field ${JSON.stringify(key)} is not a score: ${JSON.stringify(raw)}`);
  }
  return value;
}

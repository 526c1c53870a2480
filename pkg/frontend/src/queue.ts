/**
 * Offline label queue.
 *
 * A label submitted while the service is unreachable is parked here
 * with the request token it was first assigned.  Replaying an entry
 * reuses that token, so a submission that actually reached the server
 * before the connection dropped is absorbed by the server's token
 * journal instead of applying twice.  An entry leaves the queue only
 * after the server acknowledges it: delivery is exactly-once.
 */

import { Label } from './labels.js';

export interface QueuedLabel {
  sessionId: string;
  videoId: string;
  label: Label;
  token: string;
}

/** Pluggable persistence so tests can run without a browser. */
export interface QueueStore {
  load(): QueuedLabel[];
  save(entries: QueuedLabel[]): void;
}

/** Volatile store for tests and for browsers with storage disabled. */
export function memoryStore(): QueueStore {
  let held: QueuedLabel[] = [];
  return {
    load: () => held.map((entry) => ({ ...entry })),
    save: (entries) => {
      held = entries.map((entry) => ({ ...entry }));
    },
  };
}

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

/**
 * localStorage-backed store, so queued labels survive a tab reload.
 * Falls back to memory when storage is unavailable or corrupt.
 */
export function browserStore(key: string, storage?: StorageLike): QueueStore {
  const backing =
    storage ?? (typeof localStorage === 'undefined' ? undefined : localStorage);
  if (backing === undefined) {
    return memoryStore();
  }
  return {
    load: () => {
      const raw = backing.getItem(key);
      if (raw === null) {
        return [];
      }
      try {
        const parsed = JSON.parse(raw);
        return Array.isArray(parsed) ? (parsed as QueuedLabel[]) : [];
      } catch {
        return [];
      }
    },
    save: (entries) => {
      backing.setItem(key, JSON.stringify(entries));
    },
  };
}

export class LabelQueue {
  private readonly store: QueueStore;
  private held: QueuedLabel[];

  constructor(store: QueueStore) {
    this.store = store;
    this.held = store.load();
  }

  get size(): number {
    return this.held.length;
  }

  entries(): readonly QueuedLabel[] {
    return this.held;
  }

  /** Park a label; a second push with the same token is a no-op. */
  push(entry: QueuedLabel): void {
    if (this.held.some((held) => held.token === entry.token)) {
      return;
    }
    this.held.push({ ...entry });
    this.store.save(this.held);
  }

  /** Is a label for this candidate already waiting? */
  has(sessionId: string, videoId: string): boolean {
    return this.held.some(
      (entry) => entry.sessionId === sessionId && entry.videoId === videoId,
    );
  }

  /**
   * Deliver queued labels in order.  An entry is removed only once the
   * sender resolves (the server acknowledged it); the first failure is
   * rethrown and keeps that entry and the remainder queued for the next
   * try.  Returns the number delivered when every entry went through.
   */
  async flush(sender: (entry: QueuedLabel) => Promise<void>): Promise<number> {
    let delivered = 0;
    while (this.held.length > 0) {
      const entry = this.held[0];
      await sender(entry);
      this.held.shift();
      this.store.save(this.held);
      delivered += 1;
    }
    return delivered;
  }
}

/**
 * Annotation console entry point.
 *
 * Wires the session controller to the DOM: a query picker, the
 * side-by-side keyframe comparison (query left, candidate right), the
 * five label buttons with their digit-key bindings, the progress strip,
 * and the offline/retry banner.  All data flows through the /v1 API;
 * this file only moves strings between the controller's view state and
 * the page.
 */

import { ApiClient, parseCount } from './api.js';
import { Label, LABELS, labelForKey, labelName } from './labels.js';
import { browserStore, LabelQueue } from './queue.js';
import { clampPage, pageCount, pageLabel, pageSlice } from './paging.js';
import { SessionController, SessionViewState, VideoView } from './session.js';
import { many, one, RecordData } from './records.js';

// ===== CONFIG =====

declare global {
  interface Window {
    FIVR_API_BASE?: string;
  }
}

const API_BASE = window.FIVR_API_BASE ?? '';
const QUEUE_STORAGE_KEY = 'fivr-label-queue';
const HISTORY_TAIL = 8;

// ===== STATE =====

const api = new ApiClient({ base: API_BASE });
const queue = new LabelQueue(browserStore(QUEUE_STORAGE_KEY));
const controller = new SessionController(api, queue, render);

let currentView: SessionViewState = controller.current();
let queryPage = 0;
let candidatePage = 0;
let lastCandidateId: string | null = null;

// ===== DOM LOOKUPS =====

function byId<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (element === null) {
    throw new Error(`missing element #${id}`);
  }
  return element as T;
}

const pickerEl = byId<HTMLElement>('picker');
const queryListEl = byId<HTMLElement>('query-list');
const sessionListEl = byId<HTMLElement>('session-list');
const workspaceEl = byId<HTMLElement>('workspace');
const summaryEl = byId<HTMLElement>('summary');
const bannerEl = byId<HTMLElement>('banner');
const bannerTextEl = byId<HTMLElement>('banner-text');
const retryButtonEl = byId<HTMLButtonElement>('retry-button');
const sessionInfoEl = byId<HTMLElement>('session-info');
const phasePillEl = byId<HTMLElement>('phase-pill');
const progressTextEl = byId<HTMLElement>('progress-text');
const streakEl = byId<HTMLElement>('streak-counter');
const queuedBadgeEl = byId<HTMLElement>('queued-badge');
const labelBarEl = byId<HTMLElement>('label-bar');
const historyEl = byId<HTMLElement>('history');

// ===== RENDERING =====

function clear(element: HTMLElement): void {
  while (element.firstChild !== null) {
    element.removeChild(element.firstChild);
  }
}

function metaLine(video: VideoView): string {
  return `published ${video.publishedAt} · ${video.durationS}s · uploader ${video.uploaderId}`;
}

/** One keyframe strip with its pager; returns nothing, mutates the pane. */
function renderStrip(
  paneId: string,
  keyframes: string[],
  page: number,
  onPage: (page: number) => void,
): void {
  const strip = byId<HTMLElement>(`${paneId}-strip`);
  const pager = byId<HTMLElement>(`${paneId}-pager`);
  clear(strip);
  if (keyframes.length === 0) {
    const note = document.createElement('p');
    note.className = 'note';
    note.textContent = 'no keyframes rendered for this video';
    strip.appendChild(note);
  } else {
    for (const path of pageSlice(keyframes, page)) {
      const img = document.createElement('img');
      img.src = api.keyframeUrl(path);
      img.alt = path.split('/').pop() ?? path;
      img.loading = 'lazy';
      strip.appendChild(img);
    }
  }
  clear(pager);
  if (pageCount(keyframes.length) > 1) {
    const prev = document.createElement('button');
    prev.textContent = '<';
    prev.disabled = page === 0;
    prev.addEventListener('click', () => onPage(page - 1));
    const text = document.createElement('span');
    text.textContent = pageLabel(page, keyframes.length);
    const next = document.createElement('button');
    next.textContent = '>';
    next.disabled = page >= pageCount(keyframes.length) - 1;
    next.addEventListener('click', () => onPage(page + 1));
    pager.append(prev, text, next);
  }
}

function renderPane(paneId: string, video: VideoView | null, headline: string): void {
  const title = byId<HTMLElement>(`${paneId}-title`);
  const meta = byId<HTMLElement>(`${paneId}-meta`);
  if (video === null) {
    title.textContent = headline;
    meta.textContent = '';
    clear(byId(`${paneId}-strip`));
    clear(byId(`${paneId}-pager`));
    return;
  }
  title.textContent = `${headline}: ${video.title} (${video.videoId})`;
  meta.textContent = metaLine(video);
}

function renderScores(view: SessionViewState): void {
  const scores = byId<HTMLElement>('candidate-scores');
  const candidate = view.candidate;
  if (candidate === null) {
    scores.textContent = '';
    return;
  }
  scores.textContent =
    `visual ${candidate.visualScore.toFixed(4)} · ` +
    `textual ${candidate.textualScore.toFixed(4)}`;
}

function renderProgress(view: SessionViewState): void {
  const progress = view.progress;
  if (view.sessionId === null || progress === null) {
    sessionInfoEl.textContent = '';
    phasePillEl.textContent = '';
    progressTextEl.textContent = '';
    streakEl.textContent = '';
    return;
  }
  sessionInfoEl.textContent = `${view.sessionId} · query ${view.queryId}`;
  phasePillEl.textContent = progress.phase;
  phasePillEl.dataset.phase = progress.phase;
  progressTextEl.textContent =
    `${progress.annotated} labeled · ${progress.phaseAnnotated} this phase · ` +
    `${progress.queueRemaining} remaining`;
  streakEl.textContent = `irrelevant streak ${progress.irrelevantStreak}`;
}

function renderBanner(view: SessionViewState): void {
  if (view.banner === null) {
    bannerEl.hidden = true;
    bannerTextEl.textContent = '';
    return;
  }
  bannerEl.hidden = false;
  bannerTextEl.textContent = view.banner;
}

function renderQueuedBadge(view: SessionViewState): void {
  if (view.queuedCount === 0) {
    queuedBadgeEl.hidden = true;
    queuedBadgeEl.textContent = '';
    return;
  }
  queuedBadgeEl.hidden = false;
  queuedBadgeEl.textContent = `${view.queuedCount} queued`;
}

function renderHistory(view: SessionViewState): void {
  clear(historyEl);
  const tail = view.history.slice(-HISTORY_TAIL);
  for (const entry of [...tail].reverse()) {
    const item = document.createElement('li');
    item.textContent = `${entry.videoId}: ${entry.label}`;
    historyEl.appendChild(item);
  }
}

function renderLabelBar(view: SessionViewState): void {
  const disabled =
    view.busy || view.done || view.candidate === null || view.queuedCount > 0;
  for (const button of labelBarEl.querySelectorAll('button')) {
    button.disabled = disabled;
  }
}

function renderSummary(view: SessionViewState): void {
  clear(summaryEl);
  const heading = document.createElement('h2');
  heading.textContent = 'session complete';
  summaryEl.appendChild(heading);
  const total = document.createElement('p');
  const annotated = view.progress?.annotated ?? 0;
  total.textContent = `${annotated} candidates labeled for query ${view.queryId}.`;
  summaryEl.appendChild(total);
  if (view.history.length > 0) {
    const counts = new Map<Label, number>();
    for (const entry of view.history) {
      counts.set(entry.label, (counts.get(entry.label) ?? 0) + 1);
    }
    const list = document.createElement('ul');
    for (const label of LABELS) {
      const count = counts.get(label) ?? 0;
      if (count > 0) {
        const item = document.createElement('li');
        item.textContent = `${label} (${labelName(label)}): ${count}`;
        list.appendChild(item);
      }
    }
    summaryEl.appendChild(list);
  }
  const back = document.createElement('button');
  back.textContent = 'back to queries';
  back.addEventListener('click', () => {
    window.location.reload();
  });
  summaryEl.appendChild(back);
}

/** Full repaint from one view snapshot; cheap at this page size. */
function render(view: SessionViewState): void {
  currentView = view;
  const inSession = view.sessionId !== null && view.query !== null;
  pickerEl.hidden = inSession;
  workspaceEl.hidden = !inSession || view.done;
  summaryEl.hidden = !(inSession && view.done);
  renderBanner(view);
  renderQueuedBadge(view);
  renderProgress(view);
  if (!inSession) {
    return;
  }
  if (view.done) {
    renderSummary(view);
    return;
  }
  renderPane('query', view.query, 'query');
  queryPage = clampPage(queryPage, view.query?.keyframes.length ?? 0);
  renderStrip('query', view.query?.keyframes ?? [], queryPage, (page) => {
    queryPage = clampPage(page, view.query?.keyframes.length ?? 0);
    render(currentView);
  });
  const candidate = view.candidate;
  if (candidate !== null && candidate.videoId !== lastCandidateId) {
    lastCandidateId = candidate.videoId;
    candidatePage = 0;
  }
  renderPane('candidate', candidate, 'candidate');
  renderScores(view);
  candidatePage = clampPage(candidatePage, candidate?.keyframes.length ?? 0);
  renderStrip('candidate', candidate?.keyframes ?? [], candidatePage, (page) => {
    candidatePage = clampPage(page, candidate?.keyframes.length ?? 0);
    render(currentView);
  });
  renderHistory(view);
  renderLabelBar(view);
}

// ===== PICKER =====

function renderQueryList(records: RecordData[]): void {
  clear(queryListEl);
  for (const record of records) {
    const row = document.createElement('button');
    row.className = 'query-row';
    const rank = one(record, 'rank');
    const videoId = one(record, 'video_id');
    const title = one(record, 'title');
    const published = one(record, 'published_at');
    row.textContent = `#${rank} ${videoId} · ${title} · ${published}`;
    const frames = many(record, 'keyframe');
    if (frames.length > 0) {
      const img = document.createElement('img');
      img.src = api.keyframeUrl(frames[0]);
      img.alt = videoId;
      img.loading = 'lazy';
      row.prepend(img);
    }
    row.addEventListener('click', () => {
      void controller.open(videoId);
    });
    queryListEl.appendChild(row);
  }
}

function renderSessionList(records: RecordData[]): void {
  clear(sessionListEl);
  if (records.length === 0) {
    return;
  }
  const heading = document.createElement('h2');
  heading.textContent = 'resume a session';
  sessionListEl.appendChild(heading);
  for (const record of records) {
    const row = document.createElement('button');
    row.className = 'session-row';
    const sessionId = one(record, 'session_id');
    const phase = one(record, 'phase');
    const annotated = parseCount(record, 'annotated');
    row.textContent = `${sessionId} · query ${one(record, 'query_id')} · ${phase} · ${annotated} labeled`;
    row.addEventListener('click', () => {
      void controller.resume(sessionId);
    });
    sessionListEl.appendChild(row);
  }
}

// ===== ACTIONS =====

function onKeydown(event: KeyboardEvent): void {
  if (event.defaultPrevented || event.altKey || event.ctrlKey || event.metaKey) {
    return;
  }
  const label = labelForKey(event.key);
  if (label !== null) {
    event.preventDefault();
    void controller.submit(label);
    return;
  }
  const candidate = currentView.candidate;
  if (candidate === null) {
    return;
  }
  if (event.key === 'ArrowRight' || event.key === 'ArrowLeft') {
    event.preventDefault();
    const step = event.key === 'ArrowRight' ? 1 : -1;
    candidatePage = clampPage(candidatePage + step, candidate.keyframes.length);
    render(currentView);
  }
}

function buildLabelBar(): void {
  clear(labelBarEl);
  LABELS.forEach((label, at) => {
    const button = document.createElement('button');
    button.innerHTML = `<kbd>${at + 1}</kbd> ${label} <small>${labelName(label)}</small>`;
    button.addEventListener('click', () => {
      void controller.submit(label);
    });
    labelBarEl.appendChild(button);
  });
}

// ===== BOOT =====

async function loadPicker(): Promise<void> {
  try {
    renderQueryList(await api.getQueries());
    renderSessionList(await api.listSessions());
    if (currentView.banner === null) {
      bannerEl.hidden = true;
      bannerTextEl.textContent = '';
    }
  } catch {
    bannerEl.hidden = false;
    bannerTextEl.textContent = 'could not reach the annotation service';
  }
}

function boot(): void {
  buildLabelBar();
  retryButtonEl.addEventListener('click', () => {
    if (currentView.sessionId === null) {
      void loadPicker();
    }
    void controller.retry();
  });
  document.addEventListener('keydown', onKeydown);
  window.addEventListener('online', () => {
    void controller.goOnline();
  });
  render(controller.current());
  void loadPicker();
}

boot();

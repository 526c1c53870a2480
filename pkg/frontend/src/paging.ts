/**
 * Pagination for keyframe strips.
 *
 * Long strips are shown PAGE_SIZE frames at a time; every frame of the
 * strip is reachable by stepping pages.
 */

export const PAGE_SIZE = 10;

/** Number of pages needed for `total` frames; an empty strip still has one page. */
export function pageCount(total: number): number {
  if (total <= 0) {
    return 1;
  }
  return Math.ceil(total / PAGE_SIZE);
}

/** Clamp a page number into [0, pageCount(total) - 1]. */
export function clampPage(page: number, total: number): number {
  const last = pageCount(total) - 1;
  if (page < 0) {
    return 0;
  }
  return page > last ? last : page;
}

/** The slice of `items` shown on `page` (already clamped by the caller). */
export function pageSlice<T>(items: readonly T[], page: number): T[] {
  const start = page * PAGE_SIZE;
  return items.slice(start, start + PAGE_SIZE);
}

/** Display text for the pager, e.g. "2 / 5". */
export function pageLabel(page: number, total: number): string {
  return `${page + 1} / ${pageCount(total)}`;
}

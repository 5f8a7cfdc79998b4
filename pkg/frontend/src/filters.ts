// Queue filter state, serialized into the URL so views are shareable.

import type { ReviewStatus } from './types.js';

export interface FilterState {
  status: ReviewStatus | null;
  from: string | null;
  to: string | null;
  page: number;
  pageSize: number;
}

export const DEFAULT_FILTER: FilterState = {
  status: null,
  from: null,
  to: null,
  page: 1,
  pageSize: 20,
};

const STATUSES: ReviewStatus[] = ['pending', 'confirmed', 'dismissed'];

export function filterToQuery(filter: FilterState): string {
  const params = new URLSearchParams();
  if (filter.status) params.set('status', filter.status);
  if (filter.from) params.set('from', filter.from);
  if (filter.to) params.set('to', filter.to);
  if (filter.page !== 1) params.set('page', String(filter.page));
  if (filter.pageSize !== DEFAULT_FILTER.pageSize) {
    params.set('page_size', String(filter.pageSize));
  }
  return params.toString();
}

export function filterFromQuery(query: string): FilterState {
  const params = new URLSearchParams(query);
  const status = params.get('status');
  const page = Number(params.get('page') ?? '1');
  const pageSize = Number(params.get('page_size') ?? String(DEFAULT_FILTER.pageSize));
  return {
    status: STATUSES.includes(status as ReviewStatus) ? (status as ReviewStatus) : null,
    from: params.get('from'),
    to: params.get('to'),
    page: Number.isInteger(page) && page >= 1 ? page : 1,
    pageSize: Number.isInteger(pageSize) && pageSize >= 1 ? pageSize : DEFAULT_FILTER.pageSize,
  };
}

/** Push the filter into the address bar without reloading. */
export function syncFilterToUrl(filter: FilterState, win: Window = window): void {
  const query = filterToQuery(filter);
  const url = query ? `${win.location.pathname}?${query}` : win.location.pathname;
  win.history.replaceState(null, '', url);
}

export function filterFromUrl(win: Window = window): FilterState {
  return filterFromQuery(win.location.search);
}

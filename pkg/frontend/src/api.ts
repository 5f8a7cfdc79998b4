// Typed client for the /api/v1 surface. The base URL is configurable at
// runtime (window.PHONEWATCH_API_BASE) and at construction for tests.

import type { FilterState } from './filters.js';
import type { Stats, Violation, ViolationPage } from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let code = 'unknown';
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep defaults
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(base = '', fetchFn?: FetchLike) {
    this.base = base.replace(/\/$/, '');
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  async listViolations(filter: FilterState): Promise<ViolationPage> {
    const params = new URLSearchParams();
    if (filter.status) params.set('status', filter.status);
    if (filter.from) params.set('from', filter.from);
    if (filter.to) params.set('to', filter.to);
    params.set('page', String(filter.page));
    params.set('page_size', String(filter.pageSize));
    const response = await this.fetchFn(`${this.base}/api/v1/violations?${params}`);
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as ViolationPage;
  }

  snapshotUrl(violationId: number, revision: number): string {
    // revision keys the immutable cache entry
    return `${this.base}/api/v1/violations/${violationId}/snapshot?v=${revision}`;
  }

  async review(
    violationId: number,
    decision: 'confirmed' | 'dismissed',
    note: string | null = null,
  ): Promise<Violation> {
    const response = await this.fetchFn(
      `${this.base}/api/v1/violations/${violationId}/review`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ decision, note }),
      },
    );
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as Violation;
  }

  async stats(from: string | null, to: string | null, bucket: 'hour' | 'day'): Promise<Stats> {
    const params = new URLSearchParams({ bucket });
    if (from) params.set('from', from);
    if (to) params.set('to', to);
    const response = await this.fetchFn(`${this.base}/api/v1/stats?${params}`);
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as Stats;
  }
}

declare global {
  interface Window {
    PHONEWATCH_API_BASE?: string;
  }
}

export function defaultApiBase(): string {
  if (typeof window !== 'undefined' && window.PHONEWATCH_API_BASE) {
    return window.PHONEWATCH_API_BASE;
  }
  return '';
}

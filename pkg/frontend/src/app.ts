// Dashboard shell: filter bar, violation queue, stats panel, error banner,
// and a polling loop for queue freshness. All state of record lives on the
// server; reloading the page reproduces it exactly.

import { ApiClient } from './api.js';
import {
  DEFAULT_FILTER,
  FilterState,
  filterFromUrl,
  syncFilterToUrl,
} from './filters.js';
import { QueueView } from './queue.js';
import { StatsView } from './stats.js';
import type { ReviewStatus } from './types.js';

export interface AppOptions {
  api: ApiClient;
  root: HTMLElement;
  win?: Window;
  pollMs?: number;
  statsDebounceMs?: number;
}

export class App {
  readonly api: ApiClient;
  readonly root: HTMLElement;
  readonly queue: QueueView;
  readonly stats: StatsView;
  filter: FilterState;
  private readonly win: Window;
  private readonly pollMs: number;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private banner: HTMLElement;

  constructor(options: AppOptions) {
    this.api = options.api;
    this.root = options.root;
    this.win = options.win ?? window;
    this.pollMs = options.pollMs ?? 10_000;
    this.filter = filterFromUrl(this.win);

    this.root.textContent = '';
    this.banner = document.createElement('div');
    this.banner.className = 'banner';
    this.banner.hidden = true;
    this.root.appendChild(this.banner);

    this.root.appendChild(this.renderFilterBar());

    const statsEl = document.createElement('section');
    statsEl.className = 'stats';
    this.root.appendChild(statsEl);

    const queueEl = document.createElement('section');
    queueEl.className = 'violations';
    this.root.appendChild(queueEl);

    const hooks = {
      onSettled: () => void this.refresh(),
      onError: (message: string, retry: () => void) => this.showError(message, retry),
    };
    this.queue = new QueueView(queueEl, this.api, hooks);
    this.stats = new StatsView(statsEl, this.api, hooks, options.statsDebounceMs);
  }

  async start(): Promise<void> {
    await this.refresh();
    this.stats.setWindow(this.filter.from, this.filter.to);
    if (this.pollMs > 0) {
      this.pollTimer = setInterval(() => void this.refreshQueue(), this.pollMs);
    }
  }

  destroy(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
    this.root.textContent = '';
  }

  async refresh(): Promise<void> {
    await this.refreshQueue();
  }

  async refreshQueue(): Promise<void> {
    try {
      const page = await this.api.listViolations(this.filter);
      this.queue.setPage(page.items, page.total);
      this.hideError();
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.showError(`could not load violations: ${message}`, () => void this.refreshQueue());
    }
  }

  async applyFilter(partial: Partial<FilterState>): Promise<void> {
    this.filter = { ...this.filter, ...partial };
    if (partial.status !== undefined || partial.from !== undefined || partial.to !== undefined) {
      this.filter.page = 1;
    }
    syncFilterToUrl(this.filter, this.win);
    await this.refreshQueue();
    if (partial.from !== undefined || partial.to !== undefined) {
      this.stats.setWindow(this.filter.from, this.filter.to);
    }
  }

  showError(message: string, retry: () => void): void {
    this.banner.hidden = false;
    this.banner.className = 'banner error';
    this.banner.setAttribute('role', 'alert');
    this.banner.textContent = message + ' ';
    const button = document.createElement('button');
    button.className = 'retry';
    button.textContent = 'Retry';
    button.addEventListener('click', () => {
      this.hideError();
      retry();
    });
    this.banner.appendChild(button);
  }

  hideError(): void {
    this.banner.hidden = true;
    this.banner.textContent = '';
  }

  private renderFilterBar(): HTMLElement {
    const bar = document.createElement('nav');
    bar.className = 'filter-bar';

    const statuses: Array<ReviewStatus | null> = [null, 'pending', 'confirmed', 'dismissed'];
    for (const status of statuses) {
      const button = document.createElement('button');
      button.className = `filter-status filter-${status ?? 'all'}`;
      button.textContent = status ?? 'all';
      button.addEventListener('click', () => void this.applyFilter({ status }));
      bar.appendChild(button);
    }

    const prev = document.createElement('button');
    prev.className = 'page-prev';
    prev.textContent = '<';
    prev.addEventListener('click', () => {
      if (this.filter.page > 1) void this.applyFilter({ page: this.filter.page - 1 });
    });
    const next = document.createElement('button');
    next.className = 'page-next';
    next.textContent = '>';
    next.addEventListener('click', () => void this.applyFilter({ page: this.filter.page + 1 }));
    bar.append(prev, next);
    return bar;
  }
}

export function resetFilter(): FilterState {
  return { ...DEFAULT_FILTER };
}

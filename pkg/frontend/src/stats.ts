// Time-series stats: summary tiles plus an SVG bar chart of violations and
// vehicles per bucket. Window changes are debounced so a burst of input
// produces exactly one request.

import { ApiClient } from './api.js';
import type { Stats } from './types.js';

export interface StatsHooks {
  onError: (message: string, retry: () => void) => void;
}

const BAR_WIDTH = 18;
const CHART_HEIGHT = 120;

export class StatsView {
  private readonly root: HTMLElement;
  private readonly api: ApiClient;
  private readonly hooks: StatsHooks;
  private readonly debounceMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private window: { from: string | null; to: string | null } = { from: null, to: null };
  private bucket: 'hour' | 'day' = 'day';
  requestCount = 0;

  constructor(root: HTMLElement, api: ApiClient, hooks: StatsHooks, debounceMs = 250) {
    this.root = root;
    this.api = api;
    this.hooks = hooks;
    this.debounceMs = debounceMs;
    this.root.classList.add('stats-root');
  }

  setWindow(from: string | null, to: string | null, bucket: 'hour' | 'day' = this.bucket): void {
    this.window = { from, to };
    this.bucket = bucket;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.reload();
    }, this.debounceMs);
  }

  async reload(): Promise<void> {
    this.requestCount += 1;
    try {
      const stats = await this.api.stats(this.window.from, this.window.to, this.bucket);
      this.render(stats);
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.hooks.onError(`stats failed: ${message}`, () => void this.reload());
    }
  }

  render(stats: Stats): void {
    this.root.textContent = '';

    const tiles = document.createElement('div');
    tiles.className = 'tiles';
    const tileData: Array<[string, string]> = [
      ['violations', String(stats.violations_total)],
      ['pending', String(stats.violations_pending)],
      ['confirmed', String(stats.violations_confirmed)],
      ['dismissed', String(stats.violations_dismissed)],
      ['vehicles', String(stats.vehicles)],
      ['violation rate', stats.violation_rate.toFixed(3)],
    ];
    for (const [label, value] of tileData) {
      const tile = document.createElement('div');
      tile.className = `tile tile-${label.replace(' ', '-')}`;
      const valueEl = document.createElement('strong');
      valueEl.textContent = value;
      const labelEl = document.createElement('span');
      labelEl.textContent = label;
      tile.append(valueEl, labelEl);
      tiles.appendChild(tile);
    }
    this.root.appendChild(tiles);

    this.root.appendChild(this.renderChart(stats));
  }

  private renderChart(stats: Stats): SVGElement {
    const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.classList.add('buckets');
    const groups = stats.buckets.length;
    svg.setAttribute('width', String(Math.max(groups * (BAR_WIDTH * 2 + 10) + 10, 60)));
    svg.setAttribute('height', String(CHART_HEIGHT + 20));
    if (groups === 0) {
      const label = document.createElementNS('http://www.w3.org/2000/svg', 'text');
      label.setAttribute('x', '4');
      label.setAttribute('y', '20');
      label.textContent = 'no data in window';
      svg.appendChild(label);
      return svg;
    }
    const peak = Math.max(
      1,
      ...stats.buckets.map((b) => Math.max(b.violations, b.vehicles)),
    );
    stats.buckets.forEach((bucket, index) => {
      const x0 = 10 + index * (BAR_WIDTH * 2 + 10);
      const pairs: Array<['violations' | 'vehicles', number]> = [
        ['violations', bucket.violations],
        ['vehicles', bucket.vehicles],
      ];
      pairs.forEach(([series, value], k) => {
        const height = Math.round((value / peak) * CHART_HEIGHT);
        const rect = document.createElementNS('http://www.w3.org/2000/svg', 'rect');
        rect.classList.add('bar', series);
        rect.dataset.value = String(value);
        rect.dataset.bucket = bucket.start;
        rect.setAttribute('x', String(x0 + k * BAR_WIDTH));
        rect.setAttribute('y', String(CHART_HEIGHT - height + 10));
        rect.setAttribute('width', String(BAR_WIDTH - 2));
        rect.setAttribute('height', String(height));
        svg.appendChild(rect);
      });
    });
    return svg;
  }
}

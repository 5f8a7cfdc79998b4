import { beforeEach, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { StatsView } from '../src/stats.js';
import { MockServer } from './mock-server.js';

function makeStats(server: MockServer, debounceMs = 10) {
  const root = document.createElement('div');
  document.body.appendChild(root);
  const errors: string[] = [];
  const view = new StatsView(root, new ApiClient('', server.fetch), {
    onError: (message) => errors.push(message),
  }, debounceMs);
  return { root, view, errors };
}

beforeEach(() => {
  document.body.innerHTML = '';
});

describe('stats view', () => {
  it('renders tiles and two bars per bucket', async () => {
    const server = MockServer.seeded();
    const { root, view } = makeStats(server);
    view.setWindow('2026-01-01T00:00:00.000Z', '2026-01-03T00:00:00.000Z', 'day');
    await vi.waitFor(() => {
      expect(root.querySelectorAll('.tile').length).toBe(6);
    });
    expect(root.querySelectorAll('svg rect.bar')).toHaveLength(4); // 2 buckets x 2 series
    const rateTile = root.querySelector('.tile-violation-rate strong')!;
    // 5 violations, 10 vehicles inside the window -> server-computed 0.5
    expect(rateTile.textContent).toBe('0.500');
  });

  it('renders a zero-state for an empty window', async () => {
    const server = MockServer.seeded();
    const { root, view } = makeStats(server);
    view.setWindow('2030-01-01T00:00:00.000Z', '2030-01-01T00:00:00.000Z', 'day');
    await vi.waitFor(() => {
      expect(root.querySelector('svg')).not.toBeNull();
    });
    expect(root.querySelector('svg')!.textContent).toContain('no data');
    expect(root.querySelector('.tile strong')!.textContent).toBe('0');
  });

  it('debounces rapid window changes into a single request', async () => {
    const server = MockServer.seeded();
    const { view } = makeStats(server, 25);
    for (let hour = 0; hour < 8; hour += 1) {
      view.setWindow(`2026-01-01T0${hour}:00:00.000Z`, '2026-01-03T00:00:00.000Z', 'day');
    }
    await vi.waitFor(() => {
      expect(view.requestCount).toBeGreaterThan(0);
    });
    await new Promise((resolve) => setTimeout(resolve, 80));
    expect(view.requestCount).toBe(1);
    expect(server.requestLog.filter((line) => line.includes('/stats'))).toHaveLength(1);
  });

  it('surfaces errors with retry instead of failing silently', async () => {
    const server = MockServer.seeded();
    const { view, errors } = makeStats(server);
    server.failNetwork(1);
    view.setWindow(null, null, 'hour');
    await vi.waitFor(() => {
      expect(errors.length).toBe(1);
    });
    expect(errors[0]).toContain('stats failed');
  });
});

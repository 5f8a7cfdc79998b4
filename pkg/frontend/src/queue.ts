// Violation queue: paged list with snapshot thumbnails, keyboard review.
//
// Review actions update the UI optimistically and reconcile with the API
// response; a 409 (another reviewer got there first) rolls the row back and
// surfaces a conflict notice so the list can be refreshed.

import { ApiClient, ApiError } from './api.js';
import type { Violation, ViolationView } from './types.js';

export interface QueueHooks {
  /** A review reached the server (accepted or conflicted); refresh sources. */
  onSettled: () => void;
  onError: (message: string, retry: () => void) => void;
}

function asView(record: Violation): ViolationView {
  return { ...record, selected: false, snapshot_loaded: false };
}

export class QueueView {
  private readonly root: HTMLElement;
  private readonly api: ApiClient;
  private readonly hooks: QueueHooks;
  private records: ViolationView[] = [];
  private selectedIndex = -1;
  total = 0;

  constructor(root: HTMLElement, api: ApiClient, hooks: QueueHooks) {
    this.root = root;
    this.api = api;
    this.hooks = hooks;
    this.root.classList.add('queue-root');
    this.root.addEventListener('keydown', (event) => this.onKey(event as KeyboardEvent));
    this.root.tabIndex = 0;
  }

  setPage(records: Violation[], total: number): void {
    const selectedId =
      this.selectedIndex >= 0 ? this.records[this.selectedIndex]?.violation_id : undefined;
    this.records = records.map(asView);
    this.total = total;
    this.selectedIndex = this.records.findIndex((r) => r.violation_id === selectedId);
    if (this.selectedIndex < 0 && this.records.length > 0) this.selectedIndex = 0;
    if (this.selectedIndex >= 0) this.records[this.selectedIndex].selected = true;
    this.render();
  }

  get views(): readonly ViolationView[] {
    return this.records;
  }

  private onKey(event: KeyboardEvent): void {
    if (event.key === 'ArrowDown' || event.key === 'j') {
      this.moveSelection(1);
      event.preventDefault();
    } else if (event.key === 'ArrowUp' || event.key === 'k') {
      this.moveSelection(-1);
      event.preventDefault();
    } else if (event.key === 'c' && this.selected()) {
      void this.review(this.selected()!.violation_id, 'confirmed');
    } else if (event.key === 'x' && this.selected()) {
      void this.review(this.selected()!.violation_id, 'dismissed');
    }
  }

  selected(): ViolationView | null {
    return this.selectedIndex >= 0 ? this.records[this.selectedIndex] ?? null : null;
  }

  moveSelection(delta: number): void {
    if (this.records.length === 0) return;
    const previous = this.selectedIndex;
    this.selectedIndex = Math.min(
      this.records.length - 1,
      Math.max(0, this.selectedIndex + delta),
    );
    if (previous >= 0 && this.records[previous]) this.records[previous].selected = false;
    this.records[this.selectedIndex].selected = true;
    this.render();
  }

  async review(
    violationId: number,
    decision: 'confirmed' | 'dismissed',
    note: string | null = null,
  ): Promise<void> {
    const record = this.records.find((r) => r.violation_id === violationId);
    if (!record || record.review_status !== 'pending') return;

    const before: ViolationView = { ...record };
    record.review_status = decision; // optimistic
    record.reviewer_note = note;
    this.render();

    try {
      const updated = await this.api.review(violationId, decision, note);
      Object.assign(record, updated); // reconcile with server truth
      this.render();
      this.hooks.onSettled();
    } catch (error) {
      Object.assign(record, before); // roll back
      this.render();
      if (error instanceof ApiError && error.status === 409) {
        this.showConflict(violationId);
        this.hooks.onSettled(); // list is stale; let the app refetch
      } else {
        const message = error instanceof Error ? error.message : String(error);
        this.hooks.onError(`review failed: ${message}`, () =>
          void this.review(violationId, decision, note),
        );
      }
    }
  }

  private showConflict(violationId: number): void {
    const notice = document.createElement('div');
    notice.className = 'notice conflict';
    notice.setAttribute('role', 'status');
    notice.textContent = `Violation #${violationId} was already reviewed by someone else.`;
    this.root.prepend(notice);
  }

  render(): void {
    const previousNotices = Array.from(this.root.querySelectorAll('.notice'));
    this.root.textContent = '';
    for (const notice of previousNotices) this.root.appendChild(notice);

    const list = document.createElement('ul');
    list.className = 'queue';
    for (const record of this.records) {
      list.appendChild(this.renderRow(record));
    }
    if (this.records.length === 0) {
      const empty = document.createElement('p');
      empty.className = 'empty';
      empty.textContent = 'No violations match the current filter.';
      this.root.appendChild(empty);
    }
    this.root.appendChild(list);
  }

  private renderRow(record: ViolationView): HTMLElement {
    const row = document.createElement('li');
    row.className = `violation status-${record.review_status}${record.selected ? ' selected' : ''}`;
    row.dataset.id = String(record.violation_id);

    const thumb = document.createElement('img');
    thumb.className = 'thumb';
    thumb.alt = `snapshot of violation ${record.violation_id}`;
    thumb.src = this.api.snapshotUrl(record.violation_id, record.revision);
    thumb.addEventListener('load', () => {
      record.snapshot_loaded = true;
    });
    row.appendChild(thumb);

    const meta = document.createElement('div');
    meta.className = 'meta';
    meta.textContent =
      `#${record.violation_id} · ${record.stream_id} · ${record.first_seen}` +
      ` · score ${record.max_score.toFixed(2)}`;
    row.appendChild(meta);

    const status = document.createElement('span');
    status.className = `status ${record.review_status}`;
    status.textContent = record.review_status;
    row.appendChild(status);

    if (record.reviewer_note) {
      const note = document.createElement('span');
      note.className = 'note';
      note.textContent = record.reviewer_note;
      row.appendChild(note);
    }

    if (record.review_status === 'pending') {
      const noteInput = document.createElement('input');
      noteInput.className = 'note-input';
      noteInput.placeholder = 'note (optional)';
      row.appendChild(noteInput);
      for (const decision of ['confirmed', 'dismissed'] as const) {
        const button = document.createElement('button');
        button.className = decision === 'confirmed' ? 'confirm' : 'dismiss';
        button.textContent = decision === 'confirmed' ? 'Confirm' : 'Dismiss';
        button.addEventListener('click', () => {
          void this.review(record.violation_id, decision, noteInput.value || null);
        });
        row.appendChild(button);
      }
    }

    row.addEventListener('click', () => {
      const index = this.records.indexOf(record);
      if (index >= 0) {
        const current = this.selected();
        if (current) current.selected = false;
        this.selectedIndex = index;
        record.selected = true;
        this.render();
      }
    });
    return row;
  }
}

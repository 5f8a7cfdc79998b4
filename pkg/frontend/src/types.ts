// API payload types, mirroring the server's OpenAPI description.

export type ReviewStatus = 'pending' | 'confirmed' | 'dismissed';

export interface Violation {
  violation_id: number;
  stream_id: string;
  phone_track_id: number;
  windscreen_track_id: number | null;
  first_seen: string;
  last_seen: string;
  frame_index_first: number;
  snapshot_ref: string;
  max_score: number;
  review_status: ReviewStatus;
  reviewer_note: string | null;
  revision: number;
}

/** Client-side view state layered over a served record; never authoritative. */
export interface ViolationView extends Violation {
  selected: boolean;
  snapshot_loaded: boolean;
}

export interface ViolationPage {
  items: Violation[];
  page: number;
  page_size: number;
  total: number;
}

export interface StatsBucket {
  start: string;
  end: string;
  violations: number;
  vehicles: number;
}

export interface Stats {
  window: { from: string; to: string };
  violations_total: number;
  violations_pending: number;
  violations_confirmed: number;
  violations_dismissed: number;
  vehicles: number;
  violation_rate: number;
  buckets: StatsBucket[];
}

export interface ErrorBody {
  error: { code: string; message: string };
}

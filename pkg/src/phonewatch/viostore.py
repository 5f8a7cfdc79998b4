"""Unique-violation records, vehicle counting and persistence.

A phone violation is logged once per unique phone track (single-step) or
once per unique windscreen track (two-step); further sightings only update
the record. Vehicles are counted from distinct confirmed licence-plate
(single-step) or windscreen (two-step) tracks.

Persistence is an append-only record log (one JSON object per line) plus a
snapshot directory; state is rebuilt by replay. Re-emitting a violation_id
with a higher revision supersedes prior lines. Vehicle first-seen events and
review audit entries go to sibling append-only files so counts and audit
trails survive a crash without widening the published record schema.
Durability target is process death: every line is flushed to the OS before
the triggering call returns.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .detect import WINDSCREEN, LICENCE_PLATE
from .errors import ConflictError, NotFoundError, SchemaError
from .geometry import BBox
from .pipeline import FrameResult, PhoneEvent, PipelineMode

log = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"
VEHICLES_FILE = "vehicles.jsonl"
AUDIT_FILE = "audit.jsonl"
SNAPSHOT_DIR = "snapshots"

REVIEW_PENDING = "pending"
REVIEW_CONFIRMED = "confirmed"
REVIEW_DISMISSED = "dismissed"
REVIEW_DECISIONS = (REVIEW_CONFIRMED, REVIEW_DISMISSED)


class SnapshotPolicy(str, Enum):
    FIRST = "first"
    BEST_SCORE = "best_score"


def format_utc(dt: datetime) -> str:
    """ISO-8601 UTC with millisecond precision, e.g. 2026-01-01T12:00:00.250Z."""
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_utc(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _truncate_ms(dt: datetime) -> datetime:
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


@dataclass
class ViolationRecord:
    violation_id: int
    stream_id: str
    phone_track_id: int
    windscreen_track_id: Optional[int]
    first_seen: datetime
    last_seen: datetime
    frame_index_first: int
    snapshot_ref: str
    max_score: float
    review_status: str = REVIEW_PENDING
    reviewer_note: Optional[str] = None
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "violation_id": self.violation_id,
            "stream_id": self.stream_id,
            "phone_track_id": self.phone_track_id,
            "windscreen_track_id": self.windscreen_track_id,
            "first_seen": format_utc(self.first_seen),
            "last_seen": format_utc(self.last_seen),
            "frame_index_first": self.frame_index_first,
            "snapshot_ref": self.snapshot_ref,
            "max_score": self.max_score,
            "review_status": self.review_status,
            "reviewer_note": self.reviewer_note,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ViolationRecord":
        return cls(
            violation_id=data["violation_id"],
            stream_id=data["stream_id"],
            phone_track_id=data["phone_track_id"],
            windscreen_track_id=data["windscreen_track_id"],
            first_seen=parse_utc(data["first_seen"]),
            last_seen=parse_utc(data["last_seen"]),
            frame_index_first=data["frame_index_first"],
            snapshot_ref=data["snapshot_ref"],
            max_score=data["max_score"],
            review_status=data["review_status"],
            reviewer_note=data["reviewer_note"],
            revision=data["revision"],
        )


@dataclass(frozen=True)
class VehicleCount:
    stream_id: str
    window: tuple[datetime, datetime]
    count: int
    basis: str


@dataclass
class _BufferedPhone:
    """Phone sightings waiting for their windscreen track to confirm."""

    first_seen: datetime
    last_seen: datetime
    frame_index_first: int
    phone_track_id: int
    best_score: float
    best_box: BBox
    best_windscreen_box: Optional[BBox]
    best_image: Optional[np.ndarray]


class ViolationStore:
    """Single writer per stream; reviews are serialized through the same lock."""

    def __init__(
        self,
        root: str | Path,
        stream_id: str,
        mode: PipelineMode = PipelineMode.TWO_STEP,
        snapshot_policy: SnapshotPolicy = SnapshotPolicy.BEST_SCORE,
    ):
        self.root = Path(root)
        self.stream_id = stream_id
        self.mode = PipelineMode(mode)
        self.policy = SnapshotPolicy(snapshot_policy)
        self.basis = LICENCE_PLATE if self.mode is PipelineMode.SINGLE_STEP else WINDSCREEN

        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / SNAPSHOT_DIR).mkdir(exist_ok=True)

        self._lock = threading.Lock()
        self._records: dict[int, ViolationRecord] = {}
        self._by_key: dict[int, int] = {}  # track key (phone or windscreen id) -> violation_id
        self._vehicles: dict[int, datetime] = {}  # basis track id -> first_seen
        self._buffer: dict[int, _BufferedPhone] = {}
        self._next_violation_id = 1
        self.dropped_phone_events = 0

        self._replay()
        self._records_fh = (self.root / RECORDS_FILE).open("a", encoding="utf-8")
        self._vehicles_fh = (self.root / VEHICLES_FILE).open("a", encoding="utf-8")
        self._audit_fh = (self.root / AUDIT_FILE).open("a", encoding="utf-8")
        self._closed = False

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        records_path = self.root / RECORDS_FILE
        if records_path.is_file():
            for line_no, line in enumerate(records_path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    record = ViolationRecord.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError) as exc:
                    log.warning("%s:%d: skipping unreadable record line (%s)", records_path, line_no, exc)
                    continue
                current = self._records.get(record.violation_id)
                if current is None or record.revision > current.revision:
                    self._records[record.violation_id] = record
        for record in self._records.values():
            key = (
                record.windscreen_track_id
                if record.windscreen_track_id is not None
                else record.phone_track_id
            )
            self._by_key[key] = record.violation_id
        if self._records:
            self._next_violation_id = max(self._records) + 1

        vehicles_path = self.root / VEHICLES_FILE
        if vehicles_path.is_file():
            for line_no, line in enumerate(vehicles_path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                    self._vehicles[data["track_id"]] = parse_utc(data["first_seen"])
                except (json.JSONDecodeError, KeyError) as exc:
                    log.warning("%s:%d: skipping unreadable vehicle line (%s)", vehicles_path, line_no, exc)

    def _append_record(self, record: ViolationRecord) -> None:
        self._records_fh.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")
        self._records_fh.flush()

    def _append_vehicle(self, track_id: int, first_seen: datetime, frame_index: int) -> None:
        line = {
            "stream_id": self.stream_id,
            "track_id": track_id,
            "label": self.basis,
            "first_seen": format_utc(first_seen),
            "frame_index": frame_index,
        }
        self._vehicles_fh.write(json.dumps(line, separators=(",", ":")) + "\n")
        self._vehicles_fh.flush()

    # -- snapshots ---------------------------------------------------------

    def snapshot_path(self, record: ViolationRecord) -> Path:
        return self.root / record.snapshot_ref

    def snapshot_pending(self, record: ViolationRecord) -> bool:
        """True while the snapshot is not yet durable on disk (pending retry)."""
        return not self.snapshot_path(record).is_file()

    def _write_snapshot(
        self,
        record: ViolationRecord,
        image: Optional[np.ndarray],
        phone_box: Optional[BBox],
        windscreen_box: Optional[BBox],
    ) -> None:
        if image is None:
            return
        from PIL import Image, ImageDraw

        try:
            img = Image.fromarray(image).convert("RGB")
            draw = ImageDraw.Draw(img)
            if windscreen_box is not None:
                draw.rectangle(windscreen_box.as_tuple(), outline=(0, 200, 0), width=2)
            if phone_box is not None:
                draw.rectangle(phone_box.as_tuple(), outline=(220, 0, 0), width=2)
            img.save(self.snapshot_path(record), format="PNG")
        except OSError as exc:
            log.warning("snapshot for violation %d pending retry: %s", record.violation_id, exc)

    # -- ingestion ---------------------------------------------------------

    def ingest(self, result: FrameResult) -> list[ViolationRecord]:
        """Fold one frame's results into the store; returns new or updated records."""
        with self._lock:
            ts = _truncate_ms(result.timestamp)
            changed: list[ViolationRecord] = []

            for track in result.tracks.get(self.basis, []):
                if track.id not in self._vehicles:
                    self._vehicles[track.id] = ts
                    self._append_vehicle(track.id, ts, result.frame_index)

            if self.mode is PipelineMode.SINGLE_STEP:
                for event in result.phone_events:
                    if event.phone_track_id is None or not event.phone_track_confirmed:
                        continue
                    vid = self._by_key.get(event.phone_track_id)
                    if vid is not None:
                        changed.append(self._update(vid, event, ts, result))
                    else:
                        changed.append(self._create(event, ts, result, windscreen_id=None))
            else:
                for event in result.phone_events:
                    ws_id = event.windscreen_track_id
                    if ws_id is None or event.phone_track_id is None:
                        continue
                    vid = self._by_key.get(ws_id)
                    if vid is not None:
                        changed.append(self._update(vid, event, ts, result))
                    elif event.windscreen_confirmed:
                        changed.append(self._create(event, ts, result, windscreen_id=ws_id))
                    else:
                        self._buffer_event(ws_id, event, ts, result)

                confirmed_ws = {t.id for t in result.tracks.get(WINDSCREEN, [])}
                for ws_id in [w for w in self._buffer if w in confirmed_ws]:
                    if ws_id not in self._by_key:
                        changed.append(self._create_from_buffer(ws_id))
                    else:
                        del self._buffer[ws_id]

                for track_id in result.deleted_track_ids:
                    if track_id in self._buffer:
                        del self._buffer[track_id]
                        self.dropped_phone_events += 1

            return changed

    def _create(
        self,
        event: PhoneEvent,
        ts: datetime,
        result: FrameResult,
        windscreen_id: Optional[int],
    ) -> ViolationRecord:
        vid = self._next_violation_id
        self._next_violation_id += 1
        record = ViolationRecord(
            violation_id=vid,
            stream_id=self.stream_id,
            phone_track_id=event.phone_track_id,
            windscreen_track_id=windscreen_id,
            first_seen=ts,
            last_seen=ts,
            frame_index_first=result.frame_index,
            snapshot_ref=f"{SNAPSHOT_DIR}/{self.stream_id}_{vid}.png",
            max_score=event.detection.score,
        )
        self._records[vid] = record
        self._by_key[windscreen_id if windscreen_id is not None else event.phone_track_id] = vid
        self._write_snapshot(record, result.image, event.detection.box, event.windscreen_box)
        self._append_record(record)
        return dataclasses.replace(record)

    def _update(self, vid: int, event: PhoneEvent, ts: datetime, result: FrameResult) -> ViolationRecord:
        record = self._records[vid]
        record.last_seen = ts
        if event.detection.score > record.max_score:
            record.max_score = event.detection.score
            if self.policy is SnapshotPolicy.BEST_SCORE:
                self._write_snapshot(record, result.image, event.detection.box, event.windscreen_box)
        record.revision += 1
        self._append_record(record)
        return dataclasses.replace(record)

    def _buffer_event(self, ws_id: int, event: PhoneEvent, ts: datetime, result: FrameResult) -> None:
        image = result.image.copy() if result.image is not None else None
        buffered = self._buffer.get(ws_id)
        if buffered is None:
            self._buffer[ws_id] = _BufferedPhone(
                first_seen=ts,
                last_seen=ts,
                frame_index_first=result.frame_index,
                phone_track_id=event.phone_track_id,
                best_score=event.detection.score,
                best_box=event.detection.box,
                best_windscreen_box=event.windscreen_box,
                best_image=image,
            )
            return
        buffered.last_seen = ts
        if event.detection.score > buffered.best_score:
            buffered.best_score = event.detection.score
            buffered.best_box = event.detection.box
            buffered.best_windscreen_box = event.windscreen_box
            buffered.best_image = image

    def _create_from_buffer(self, ws_id: int) -> ViolationRecord:
        buffered = self._buffer.pop(ws_id)
        vid = self._next_violation_id
        self._next_violation_id += 1
        record = ViolationRecord(
            violation_id=vid,
            stream_id=self.stream_id,
            phone_track_id=buffered.phone_track_id,
            windscreen_track_id=ws_id,
            first_seen=buffered.first_seen,
            last_seen=buffered.last_seen,
            frame_index_first=buffered.frame_index_first,
            snapshot_ref=f"{SNAPSHOT_DIR}/{self.stream_id}_{vid}.png",
            max_score=buffered.best_score,
        )
        self._records[vid] = record
        self._by_key[ws_id] = vid
        if buffered.best_image is not None:
            self._write_snapshot(record, buffered.best_image, buffered.best_box, buffered.best_windscreen_box)
        self._append_record(record)
        return dataclasses.replace(record)

    # -- review ------------------------------------------------------------

    def review(self, violation_id: int, decision: str, note: Optional[str] = None) -> ViolationRecord:
        """Adjudicate a pending record; transitions only pending -> confirmed|dismissed."""
        if decision not in REVIEW_DECISIONS:
            raise SchemaError(f"decision must be one of {REVIEW_DECISIONS}, got {decision!r}")
        with self._lock:
            record = self._records.get(violation_id)
            if record is None:
                raise NotFoundError(f"violation {violation_id} not found")
            if record.review_status != REVIEW_PENDING:
                raise ConflictError(
                    f"violation {violation_id} already {record.review_status}"
                )
            record.review_status = decision
            record.reviewer_note = note
            record.revision += 1
            self._append_record(record)
            audit = {
                "violation_id": violation_id,
                "decision": decision,
                "note": note,
                "at": format_utc(datetime.now(timezone.utc)),
            }
            self._audit_fh.write(json.dumps(audit, separators=(",", ":")) + "\n")
            self._audit_fh.flush()
            return dataclasses.replace(record)

    # -- queries -----------------------------------------------------------

    def get(self, violation_id: int) -> ViolationRecord:
        with self._lock:
            record = self._records.get(violation_id)
            if record is None:
                raise NotFoundError(f"violation {violation_id} not found")
            return dataclasses.replace(record)

    def records(
        self,
        status: Optional[str] = None,
        window: Optional[tuple[datetime, datetime]] = None,
    ) -> list[ViolationRecord]:
        """Records filtered by status and first_seen in [from, to), newest first."""
        with self._lock:
            out = []
            for record in self._records.values():
                if status is not None and record.review_status != status:
                    continue
                if window is not None and not (window[0] <= record.first_seen < window[1]):
                    continue
                out.append(dataclasses.replace(record))
        out.sort(key=lambda r: (r.first_seen, r.violation_id), reverse=True)
        return out

    def vehicle_count(self, stream_id: str, window: tuple[datetime, datetime]) -> VehicleCount:
        if stream_id != self.stream_id:
            raise NotFoundError(f"unknown stream {stream_id!r}")
        with self._lock:
            count = sum(1 for seen in self._vehicles.values() if window[0] <= seen < window[1])
        return VehicleCount(stream_id=stream_id, window=window, count=count, basis=self.basis)

    def vehicle_first_seen_times(self) -> list[datetime]:
        with self._lock:
            return sorted(self._vehicles.values())

    def total_vehicles(self) -> int:
        with self._lock:
            return len(self._vehicles)

    def total_violations(self) -> int:
        with self._lock:
            return len(self._records)

    def state_fingerprint(self) -> str:
        """Digest of all externally visible state; GETs must never change it."""
        with self._lock:
            payload = {
                "records": [self._records[vid].to_dict() for vid in sorted(self._records)],
                "vehicles": {
                    str(tid): format_utc(seen) for tid, seen in sorted(self._vehicles.items())
                },
                "dropped": self.dropped_phone_events,
            }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def flush(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._records_fh.flush()
            self._vehicles_fh.flush()
            self._audit_fh.flush()

    def close(self) -> None:
        self.flush()
        with self._lock:
            if self._closed:
                return
            self._closed = True
            self._records_fh.close()
            self._vehicles_fh.close()
            self._audit_fh.close()

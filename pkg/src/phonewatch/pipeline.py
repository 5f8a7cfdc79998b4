"""Single-step and two-step frame pipelines.

Single-step: one detector over the full frame finds phones and licence
plates. Two-step: a windscreen detector runs on the full frame, the driver
side of each windscreen is cropped from the original frame and resized for a
dedicated phone detector, and phone boxes are mapped back through the
crop+resize chain. All published boxes are in original-frame coordinates;
every stage is timed.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .detect import (
    LICENCE_PLATE,
    PHONE,
    WINDSCREEN,
    Detection,
    DetectorBackend,
    Frame,
    detect,
)
from .errors import ConfigError, InputError, PhonewatchError
from .geometry import BBox, Crop, FrameSize, Side, Transform, driver_side_region
from .track import Track, Tracker, TrackerConfig

log = logging.getLogger(__name__)

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


class PipelineMode(str, Enum):
    SINGLE_STEP = "single_step"
    TWO_STEP = "two_step"


@dataclass(frozen=True)
class CropConfig:
    """Driver-side cropping policy for the two-step pipeline.

    `side` is configurable so left-hand-drive territories can crop the
    opposite side of the windscreen. `padding` grows the crop by that ratio
    of its size on every edge; `min_pixels` skips windscreens whose
    rasterized crop would be smaller than this many pixels.
    """

    side: Side = "right"
    fraction: float = 0.5
    padding: float = 0.0
    min_pixels: int = 0


@dataclass(frozen=True)
class PhoneEvent:
    """A phone detection in frame space with its track provenance."""

    detection: Detection
    phone_track_id: Optional[int]
    phone_track_confirmed: bool
    windscreen_track_id: Optional[int] = None
    windscreen_confirmed: bool = False
    windscreen_box: Optional[BBox] = None


@dataclass
class FrameResult:
    frame_index: int
    timestamp: datetime
    frame_size: FrameSize
    detections: list[Detection]
    tracks: dict[str, list[Track]]
    phone_events: list[PhoneEvent]
    deleted_track_ids: list[int]
    stage_timings: dict[str, int]  # microseconds, only stages that ran
    image: Optional[np.ndarray] = None  # transient pixels for snapshotting


@dataclass(frozen=True)
class StreamSummary:
    frames: int
    wall_seconds: float
    mean_fps: float
    stage_means_us: dict[str, float]
    skipped: int


class DirectoryFrameSource:
    """Frames from a directory of numbered images.

    Zero-padded numeric filenames define frame order and frame indices. When
    `fps` is given, timestamps are synthesized from `start` (source-provided
    timing, like a video's presentation timestamps); otherwise each frame is
    stamped with the wall clock at decode.
    """

    def __init__(self, path: str | Path, fps: Optional[float] = None, start: Optional[datetime] = None):
        self.path = Path(path)
        if not self.path.is_dir():
            raise InputError(f"frame directory not found: {self.path}")
        frames = [
            p for p in self.path.iterdir()
            if p.suffix.lower() in _IMAGE_SUFFIXES and p.stem.isdigit()
        ]
        if not frames:
            raise InputError(f"no numbered frames in {self.path}")
        self._files = sorted(frames, key=lambda p: int(p.stem))
        self.fps = fps
        self.start = start

    def __len__(self) -> int:
        return len(self._files)

    def __iter__(self) -> Iterator[Frame]:
        from PIL import Image

        start = self.start
        if self.fps is not None and start is None:
            start = datetime.now(timezone.utc)
        for file in self._files:
            index = int(file.stem)
            try:
                with Image.open(file) as img:
                    array = np.asarray(img.convert("RGB"))
            except OSError as exc:
                raise InputError(f"unreadable frame {file}: {exc}") from exc
            h, w = array.shape[:2]
            if self.fps is not None:
                from datetime import timedelta

                ts = start + timedelta(seconds=index / self.fps)
            else:
                ts = datetime.now(timezone.utc)
            yield Frame(index=index, size=FrameSize(w, h), image=array, timestamp=ts)


class Pipeline:
    """Runs one stream through the configured architecture.

    Owns the stream's trackers; `process` calls must be serialized per
    instance. Independent streams get independent Pipeline instances.
    """

    def __init__(
        self,
        mode: PipelineMode,
        primary: DetectorBackend,
        phone: Optional[DetectorBackend] = None,
        crop: CropConfig = CropConfig(),
        tracker_config: TrackerConfig = TrackerConfig(),
        tracking: bool = True,
    ):
        self.mode = PipelineMode(mode)
        self.primary = primary
        self.phone = phone
        self.crop = crop
        self.tracking = tracking

        if self.mode is PipelineMode.SINGLE_STEP:
            required = {PHONE, LICENCE_PLATE}
            if not required <= set(primary.spec.classes):
                raise ConfigError(
                    f"single-step backend must expose {sorted(required)}, "
                    f"got {sorted(primary.spec.classes)}"
                )
        else:
            if WINDSCREEN not in primary.spec.classes:
                raise ConfigError("two-step primary backend must expose 'windscreen'")
            if phone is None or PHONE not in phone.spec.classes:
                raise ConfigError("two-step mode needs a phone backend exposing 'phone'")

        ids = itertools.count(1)
        self.tracker = Tracker(tracker_config, id_source=ids)
        # Independent per-role track set for two-step phones, drawing from the
        # same per-stream ID counter.
        self.phone_tracker = Tracker(tracker_config, id_source=ids)

    def process(self, frame: Frame, decode_us: Optional[int] = None) -> FrameResult:
        if self.mode is PipelineMode.SINGLE_STEP:
            return self.run_single_step(frame, decode_us)
        return self.run_two_step(frame, decode_us)

    def _frame_space(self, detections: Sequence[Detection], transform) -> list[Detection]:
        out = []
        for det in detections:
            box = transform.invert(det.box)
            if box is None:
                continue
            out.append(Detection(det.label, box, det.score))
        return out

    def run_single_step(self, frame: Frame, decode_us: Optional[int] = None) -> FrameResult:
        timings: dict[str, int] = {}
        if decode_us is not None:
            timings["decode"] = decode_us

        t0 = time.perf_counter_ns()
        raw, resize = detect(self.primary, frame, frame.size)
        timings["detect1"] = (time.perf_counter_ns() - t0) // 1000

        frame_dets = self._frame_space(raw, resize)

        tracks: dict[str, list[Track]] = {}
        deleted: list[int] = []
        assignments: list[int] = []
        if self.tracking:
            t0 = time.perf_counter_ns()
            confirmed = self.tracker.step(frame.index, frame_dets)
            timings["track"] = (time.perf_counter_ns() - t0) // 1000
            assignments = self.tracker.last_assignments
            deleted = list(self.tracker.removed_track_ids)
            for track in confirmed:
                tracks.setdefault(track.label, []).append(track)

        events = []
        for i, det in enumerate(frame_dets):
            if det.label != PHONE:
                continue
            if self.tracking:
                tid = assignments[i]
                confirmed_flag = self.tracker.tracks[tid].confirmed
            else:
                tid, confirmed_flag = None, False
            events.append(PhoneEvent(det, tid, confirmed_flag))

        return FrameResult(
            frame_index=frame.index,
            timestamp=frame.timestamp or datetime.now(timezone.utc),
            frame_size=frame.size,
            detections=frame_dets,
            tracks=tracks,
            phone_events=events,
            deleted_track_ids=deleted,
            stage_timings=timings,
            image=frame.image,
        )

    def run_two_step(self, frame: Frame, decode_us: Optional[int] = None) -> FrameResult:
        timings: dict[str, int] = {}
        if decode_us is not None:
            timings["decode"] = decode_us

        t0 = time.perf_counter_ns()
        raw_ws, resize1 = detect(self.primary, frame, frame.size)
        timings["detect1"] = (time.perf_counter_ns() - t0) // 1000

        ws_dets = self._frame_space(raw_ws, resize1)

        tracks: dict[str, list[Track]] = {}
        deleted: list[int] = []
        ws_assignments: list[int] = []
        if self.tracking:
            t0 = time.perf_counter_ns()
            for track in self.tracker.step(frame.index, ws_dets):
                tracks.setdefault(track.label, []).append(track)
            timings["track"] = (time.perf_counter_ns() - t0) // 1000
            ws_assignments = self.tracker.last_assignments
            deleted.extend(self.tracker.removed_track_ids)

        crop_ns = 0
        detect2_ns = 0
        phone_dets: list[Detection] = []
        provenance: list[int] = []  # windscreen det index per phone det
        for wsi, ws in enumerate(ws_dets):
            t0 = time.perf_counter_ns()
            region = driver_side_region(ws.box, self.crop.side, self.crop.fraction)
            if self.crop.padding > 0.0:
                region = region.expanded(self.crop.padding)
            region = region.clamped(frame.size.width, frame.size.height)
            if region is None:
                log.warning("frame %d: windscreen %d driver-side crop empty, skipped", frame.index, wsi)
                crop_ns += time.perf_counter_ns() - t0
                continue
            x0, y0, x1, y1 = region.pixel_bounds(frame.size)
            if x1 - x0 < 1 or y1 - y0 < 1:
                log.warning("frame %d: windscreen %d crop has zero pixel area, skipped", frame.index, wsi)
                crop_ns += time.perf_counter_ns() - t0
                continue
            if (x1 - x0) * (y1 - y0) < self.crop.min_pixels:
                crop_ns += time.perf_counter_ns() - t0
                continue
            raster = BBox(float(x0), float(y0), float(x1), float(y1))
            crop_size = FrameSize(x1 - x0, y1 - y0)
            crop_image = frame.image[y0:y1, x0:x1] if frame.image is not None else None
            crop_frame = Frame(
                index=frame.index,
                size=crop_size,
                image=crop_image,
                timestamp=frame.timestamp,
                region=raster,
                parent_size=frame.size,
            )
            crop_ns += time.perf_counter_ns() - t0

            t0 = time.perf_counter_ns()
            raw_phones, resize2 = detect(self.phone, crop_frame, crop_size)
            chain = Transform((Crop(raster), resize2))
            for det in raw_phones:
                box = chain.invert(det.box)
                if box is None:
                    continue
                phone_dets.append(Detection(det.label, box, det.score))
                provenance.append(wsi)
            detect2_ns += time.perf_counter_ns() - t0

        timings["crop"] = crop_ns // 1000
        if detect2_ns:
            timings["detect2"] = detect2_ns // 1000

        phone_assignments: list[int] = []
        if self.tracking:
            t0 = time.perf_counter_ns()
            for track in self.phone_tracker.step(frame.index, phone_dets):
                tracks.setdefault(track.label, []).append(track)
            timings["track"] = timings.get("track", 0) + (time.perf_counter_ns() - t0) // 1000
            phone_assignments = self.phone_tracker.last_assignments
            deleted.extend(self.phone_tracker.removed_track_ids)

        events = []
        for j, det in enumerate(phone_dets):
            ws_det = ws_dets[provenance[j]]
            if self.tracking:
                ws_id = ws_assignments[provenance[j]]
                ws_confirmed = self.tracker.tracks[ws_id].confirmed
                pid = phone_assignments[j]
                p_confirmed = self.phone_tracker.tracks[pid].confirmed
            else:
                ws_id, ws_confirmed, pid, p_confirmed = None, False, None, False
            events.append(
                PhoneEvent(det, pid, p_confirmed, ws_id, ws_confirmed, ws_det.box)
            )

        return FrameResult(
            frame_index=frame.index,
            timestamp=frame.timestamp or datetime.now(timezone.utc),
            frame_size=frame.size,
            detections=ws_dets + phone_dets,
            tracks=tracks,
            phone_events=events,
            deleted_track_ids=deleted,
            stage_timings=timings,
            image=frame.image,
        )

    def run_stream(
        self,
        source: Iterable[Frame],
        subscribers: Sequence[Callable[[FrameResult], None]] = (),
    ) -> StreamSummary:
        """Process every frame in order, fanning results out to subscribers.

        Per-frame decode or backend errors are logged and the frame skipped;
        the stream continues.
        """
        frames = 0
        skipped = 0
        stage_sums: dict[str, int] = {}
        iterator = iter(source)
        started = time.perf_counter()
        while True:
            t0 = time.perf_counter_ns()
            try:
                frame = next(iterator)
            except StopIteration:
                break
            except (PhonewatchError, OSError) as exc:
                log.warning("frame skipped: %s", exc)
                skipped += 1
                continue
            decode_us = (time.perf_counter_ns() - t0) // 1000
            try:
                result = self.process(frame, decode_us)
            except (PhonewatchError, OSError) as exc:
                log.warning("frame %d skipped: %s", frame.index, exc)
                skipped += 1
                continue
            for subscriber in subscribers:
                subscriber(result)
            frames += 1
            for stage, us in result.stage_timings.items():
                stage_sums[stage] = stage_sums.get(stage, 0) + us
        wall = time.perf_counter() - started
        return StreamSummary(
            frames=frames,
            wall_seconds=wall,
            mean_fps=frames / wall if wall > 0 else 0.0,
            stage_means_us={k: v / frames for k, v in stage_sums.items()} if frames else {},
            skipped=skipped,
        )

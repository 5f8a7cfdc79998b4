"""Shared builders for scripted scenarios and synthetic pipeline results."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from phonewatch.detect import Detection, DetectorSpec, LICENCE_PLATE, PHONE, WINDSCREEN
from phonewatch.geometry import BBox, FrameSize
from phonewatch.pipeline import FrameResult, PhoneEvent
from phonewatch.track import KalmanBoxFilter, Track, TrackStatus

T0 = datetime(2026, 1, 1, 12, 0, 0, tzinfo=timezone.utc)

FULL_HD = FrameSize(1920, 1080)


def spec(name, classes, input_size=320, threshold=0.5):
    return DetectorSpec(
        name=name,
        input_size=FrameSize(input_size, input_size),
        classes=frozenset(classes),
        score_threshold=threshold,
    )


def write_script(path: Path, records: list[dict]) -> Path:
    """records: dicts with frame, label, box, score and optional space."""
    lines = []
    for record in records:
        record = dict(record)
        record.setdefault("space", [FULL_HD.width, FULL_HD.height])
        lines.append(json.dumps(record))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def script_entry(frame, label, box, score=0.9, space=None):
    entry = {"frame": frame, "label": label, "box": list(box), "score": score}
    if space is not None:
        entry["space"] = space
    return entry


def make_track(track_id: int, label: str, box: BBox, confirmed: bool = True) -> Track:
    kf = KalmanBoxFilter()
    mean, cov = kf.initiate(box)
    return Track(
        id=track_id,
        label=label,
        mean=mean,
        cov=cov,
        status=TrackStatus.CONFIRMED if confirmed else TrackStatus.TENTATIVE,
        hits=3 if confirmed else 1,
    )


def make_result(
    frame_index: int,
    tracks: dict[str, list[Track]] | None = None,
    phone_events: list[PhoneEvent] | None = None,
    deleted: list[int] | None = None,
    timestamp: datetime | None = None,
    image: np.ndarray | None = None,
    frame_size: FrameSize = FULL_HD,
) -> FrameResult:
    return FrameResult(
        frame_index=frame_index,
        timestamp=timestamp or (T0 + timedelta(seconds=frame_index / 10)),
        frame_size=frame_size,
        detections=[],
        tracks=tracks or {},
        phone_events=phone_events or [],
        deleted_track_ids=deleted or [],
        stage_timings={},
        image=image,
    )


def phone_event(
    box: BBox,
    score: float = 0.8,
    phone_track_id: int = 101,
    phone_confirmed: bool = True,
    windscreen_track_id: int | None = None,
    windscreen_confirmed: bool = False,
    windscreen_box: BBox | None = None,
) -> PhoneEvent:
    return PhoneEvent(
        detection=Detection(PHONE, box, score),
        phone_track_id=phone_track_id,
        phone_track_confirmed=phone_confirmed,
        windscreen_track_id=windscreen_track_id,
        windscreen_confirmed=windscreen_confirmed,
        windscreen_box=windscreen_box,
    )


def random_eval_instance(rng):
    """<= 4 GT boxes and <= 6 detections with overlapping jitter, as plain
    tuples so both the package and the brute-force oracle can consume them."""
    n_gt = rng.randint(1, 4)
    n_det = rng.randint(0, 6)
    gts = []
    for _ in range(n_gt):
        x = rng.uniform(0, 200)
        y = rng.uniform(0, 200)
        w = rng.uniform(8, 60)
        h = rng.uniform(8, 60)
        gts.append(("img", (x, y, x + w, y + h)))
    dets = []
    for _ in range(n_det):
        gx, gy, gx1, gy1 = gts[rng.randrange(n_gt)][1]
        jitter = rng.uniform(0, 40)
        dx = rng.uniform(-jitter, jitter)
        dy = rng.uniform(-jitter, jitter)
        score = rng.choice([round(rng.random(), 2), rng.random()])  # include ties
        dets.append(("img", (gx + dx, gy + dy, gx1 + dx, gy1 + dy), score))
    return dets, gts


def eval_instance_to_package_types(dets, gts):
    from phonewatch.evalkit import GroundTruthSet, Prediction

    gt = GroundTruthSet()
    for image, box in gts:
        gt.add(image, PHONE, BBox(*box))
    preds = [Prediction(image, PHONE, BBox(*box), score) for image, box, score in dets]
    return preds, gt


def seeded_review_store(root: Path, pending=3, confirmed=1, dismissed=1, vehicles=10):
    """Violations at T0 + 6h steps and vehicles at T0 + 4h steps."""
    from phonewatch.pipeline import PipelineMode
    from phonewatch.viostore import ViolationStore

    ws_box = BBox(700, 300, 1220, 560)
    phone_box = BBox(1040, 380, 1090, 430)
    store = ViolationStore(root, "cam-01", PipelineMode.TWO_STEP)
    image = np.zeros((240, 320, 3), dtype=np.uint8)
    total = pending + confirmed + dismissed
    frame = 0
    for i in range(vehicles):
        ts = T0 + timedelta(hours=4 * i)
        track = make_track(i + 1, WINDSCREEN, ws_box)
        store.ingest(make_result(frame, tracks={WINDSCREEN: [track]}, timestamp=ts))
        frame += 1
    for i in range(total):
        ts = T0 + timedelta(hours=6 * i, minutes=30)
        track = make_track(i + 1, WINDSCREEN, ws_box)
        store.ingest(
            make_result(
                frame,
                tracks={WINDSCREEN: [track]},
                phone_events=[
                    phone_event(
                        phone_box,
                        score=0.6 + (i % 8) * 0.05,
                        phone_track_id=100 + i,
                        windscreen_track_id=i + 1,
                        windscreen_confirmed=True,
                        windscreen_box=ws_box,
                    )
                ],
                timestamp=ts,
                image=image,
            )
        )
        frame += 1
    for i in range(confirmed):
        store.review(pending + i + 1, "confirmed", note="verified")
    for i in range(dismissed):
        store.review(pending + confirmed + i + 1, "dismissed", note="glare")
    return store


def make_frame_dir(path: Path, count: int, size=(64, 48), start_index: int = 0) -> Path:
    """Write `count` numbered PNG frames (width, height = size)."""
    from PIL import Image

    path.mkdir(parents=True, exist_ok=True)
    width, height = size
    base = np.zeros((height, width, 3), dtype=np.uint8)
    base[:, :, 2] = 60
    img = Image.fromarray(base)
    for i in range(start_index, start_index + count):
        img.save(path / f"{i:06d}.png")
    return path


# Scripted 200-frame scenario: three vehicles, two phone users, one phone
# visible in 40 nonconsecutive frames. Used by tracker-dedup tests in both
# modes; geometry is stationary so each object keeps a single track.
SCENARIO_FRAMES = 200

PLATE_BOXES = [
    (100, 900, 260, 950),
    (800, 900, 960, 950),
    (1500, 900, 1660, 950),
]
WINDSCREEN_BOXES = [
    (80, 300, 600, 560),
    (700, 300, 1220, 560),
    (1320, 300, 1840, 560),
]
# Inside the right (driver-side) half of windscreens 1 and 2.
PHONE_USER1_BOX = (420, 380, 470, 430)  # frames 20..59, consecutive
PHONE_USER2_BOX = (1040, 380, 1090, 430)  # frames 80, 82, ..., 158

PHONE_USER1_FRAMES = list(range(20, 60))
PHONE_USER2_FRAMES = list(range(80, 159, 2))

SINGLE_STEP_PHONE_BOXES = {
    tuple(PHONE_USER1_FRAMES): PHONE_USER1_BOX,
    tuple(PHONE_USER2_FRAMES): PHONE_USER2_BOX,
}


def single_step_scenario_script(path: Path) -> Path:
    records = []
    for frame in range(SCENARIO_FRAMES):
        for box in PLATE_BOXES:
            records.append(script_entry(frame, LICENCE_PLATE, box, score=0.85))
    for frames, box in SINGLE_STEP_PHONE_BOXES.items():
        for frame in frames:
            records.append(script_entry(frame, PHONE, box, score=0.7 + (frame % 5) * 0.04))
    records.sort(key=lambda r: r["frame"])
    return write_script(path, records)


def write_engine_config(
    directory: Path,
    mode: str = "single_step",
    detectors: dict | None = None,
    stream_id: str = "cam-01",
    fps: float | None = 10.0,
    start: str | None = "2026-01-01T12:00:00.000Z",
    tracker: dict | None = None,
    crop: dict | None = None,
    server: dict | None = None,
    store_root: str = "store",
    name: str = "engine.yaml",
) -> Path:
    import yaml

    config = {
        "stream_id": stream_id,
        "mode": mode,
        "detectors": detectors or {},
        "store": {"root": store_root},
        "input": {"fps": fps, "start": start},
    }
    if tracker:
        config["tracker"] = tracker
    if crop:
        config["crop"] = crop
    if server:
        config["server"] = server
    path = directory / name
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path


def detector_entry(script_name: str, classes, input_size=320, threshold=0.5, latency_s=0.0):
    return {
        "kind": "scripted",
        "script": script_name,
        "input_size": [input_size, input_size],
        "classes": list(classes),
        "score_threshold": threshold,
        "latency_s": latency_s,
    }


def two_step_scenario_scripts(ws_path: Path, phone_path: Path) -> tuple[Path, Path]:
    ws_records = []
    for frame in range(SCENARIO_FRAMES):
        for box in WINDSCREEN_BOXES:
            ws_records.append(script_entry(frame, WINDSCREEN, box, score=0.9))
    phone_records = []
    for frames, box in SINGLE_STEP_PHONE_BOXES.items():
        for frame in frames:
            phone_records.append(script_entry(frame, PHONE, box, score=0.7 + (frame % 5) * 0.04))
    phone_records.sort(key=lambda r: r["frame"])
    return write_script(ws_path, ws_records), write_script(phone_path, phone_records)

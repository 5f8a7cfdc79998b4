"""Detector abstraction and the deterministic scripted backend.

Every downstream stage (tracking, violation logging, benchmarks) is written
against :class:`DetectorBackend`, so the whole system can be exercised with a
scripted detector replaying detections from a file instead of running neural
inference. A neural adapter for ONNX weights is provided as an optional
backend behind a lazy import; nothing in the core requires it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import BackendError, InputError, SchemaError, ScriptParseError
from .geometry import BBox, FrameSize, Resize

PHONE = "phone"
LICENCE_PLATE = "licence_plate"
WINDSCREEN = "windscreen"

#: Score threshold suggested for evaluation runs (PR curves need the
#: low-confidence tail) versus live violation logging, where a higher
#: threshold keeps false positives down.
EVAL_SCORE_THRESHOLD = 0.25
LIVE_SCORE_THRESHOLD = 0.5


class ClassRegistry:
    """Case-sensitive registry of known detection class labels."""

    def __init__(self, labels: Sequence[str] = (PHONE, LICENCE_PLATE, WINDSCREEN)):
        self._labels: list[str] = []
        for label in labels:
            self.register(label)

    def register(self, label: str) -> None:
        if not label or not isinstance(label, str):
            raise SchemaError(f"invalid class label {label!r}")
        if label in self._labels:
            raise SchemaError(f"duplicate class label {label!r}")
        self._labels.append(label)

    def __contains__(self, label: str) -> bool:
        return label in self._labels

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)


DEFAULT_REGISTRY = ClassRegistry()


@dataclass(frozen=True)
class Detection:
    """One detected object: class label, box and confidence score.

    The box's coordinate space is owned by whoever produced the detection;
    backends emit detector-input coordinates, the pipeline republishes in
    original-frame coordinates.
    """

    label: str
    box: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise SchemaError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectorSpec:
    name: str
    input_size: FrameSize
    classes: frozenset[str]
    score_threshold: float = LIVE_SCORE_THRESHOLD

    def __post_init__(self):
        if not 0.0 <= self.score_threshold <= 1.0:
            raise SchemaError(f"score_threshold must be in [0, 1], got {self.score_threshold}")


@dataclass(frozen=True)
class Frame:
    """A frame (or a crop of one) handed to a detector.

    For crops, `region` is the rasterized sub-rectangle of the parent frame
    this image was cut from and `parent_size` the parent's dimensions; both
    are None for full frames. `image` may be None when the backend declares
    it needs no pixels (scripted replay).
    """

    index: int
    size: FrameSize
    image: Optional[np.ndarray] = None
    timestamp: Optional[datetime] = None
    region: Optional[BBox] = None
    parent_size: Optional[FrameSize] = None


class DetectorBackend:
    """Contract every detector plugs in through.

    `infer` returns detections in detector-input coordinates, unfiltered;
    thresholding and clamping happen in :func:`detect`. A backend instance is
    used by one worker at a time; scripted backends are immutable after load
    and safe for shared reads.
    """

    spec: DetectorSpec
    needs_pixels: bool = True

    def infer(self, frame: Frame) -> list[Detection]:
        raise NotImplementedError


def detect(backend: DetectorBackend, frame: Frame, frame_size: FrameSize) -> tuple[list[Detection], Resize]:
    """Run one inference and return input-space detections plus the resize
    transform from frame space to detector-input space, so callers can map
    boxes back onto the frame."""
    if frame.size != frame_size:
        raise InputError(f"frame size {frame.size} does not match declared {frame_size}")
    if backend.needs_pixels and frame.image is None:
        raise InputError(f"frame {frame.index}: no image data for backend '{backend.spec.name}'")
    try:
        raw = backend.infer(frame)
    except Exception as exc:
        raise BackendError(backend.spec.name, str(exc)) from exc

    input_size = backend.spec.input_size
    out: list[Detection] = []
    for det in raw:
        if det.score < backend.spec.score_threshold:
            continue
        clamped = det.box.clamped(input_size.width, input_size.height)
        if clamped is None:
            continue
        if clamped is not det.box:
            det = Detection(det.label, clamped, det.score)
        out.append(det)
    return out, Resize(frame_size, input_size)


@dataclass(frozen=True)
class _ScriptEntry:
    label: str
    rel: tuple[float, float, float, float]  # box normalized to the declared space
    score: float


class ScriptedBackend(DetectorBackend):
    """Replays detections from a script file, keyed by frame index.

    Scripted boxes are stored normalized to their declared "space", which is
    interpreted as proportional to the original full frame. A full-frame
    query returns each box rescaled to the detector input; a crop query
    projects the box into the crop first and drops it when it falls outside,
    so a scripted phone shows up only in the windscreen crop that actually
    contains it.

    `latency_s` simulates per-inference compute so throughput benchmarks of
    pipeline variants measure a realistic cost per model invocation.
    """

    needs_pixels = False

    def __init__(self, spec: DetectorSpec, entries: dict[int, list[_ScriptEntry]], latency_s: float = 0.0):
        self.spec = spec
        self._entries = entries
        self.latency_s = latency_s

    def infer(self, frame: Frame) -> list[Detection]:
        if self.latency_s > 0.0:
            time.sleep(self.latency_s)
        out: list[Detection] = []
        input_size = self.spec.input_size
        for entry in self._entries.get(frame.index, ()):
            if frame.region is None:
                box = BBox(
                    entry.rel[0] * input_size.width,
                    entry.rel[1] * input_size.height,
                    entry.rel[2] * input_size.width,
                    entry.rel[3] * input_size.height,
                )
            else:
                parent = frame.parent_size if frame.parent_size is not None else frame.size
                region = frame.region
                absolute = BBox(
                    entry.rel[0] * parent.width,
                    entry.rel[1] * parent.height,
                    entry.rel[2] * parent.width,
                    entry.rel[3] * parent.height,
                )
                ix0 = max(absolute.x_min, region.x_min)
                iy0 = max(absolute.y_min, region.y_min)
                ix1 = min(absolute.x_max, region.x_max)
                iy1 = min(absolute.y_max, region.y_max)
                if ix0 >= ix1 or iy0 >= iy1:
                    continue
                local = BBox(
                    ix0 - region.x_min, iy0 - region.y_min, ix1 - region.x_min, iy1 - region.y_min
                ).clamped(frame.size.width, frame.size.height)
                if local is None:
                    continue
                box = BBox(
                    local.x_min * input_size.width / frame.size.width,
                    local.y_min * input_size.height / frame.size.height,
                    local.x_max * input_size.width / frame.size.width,
                    local.y_max * input_size.height / frame.size.height,
                )
            out.append(Detection(entry.label, box, entry.score))
        return out


_SCRIPT_FIELDS = {"frame", "label", "box", "score", "space"}


def load_scripted_backend(
    path: str | Path,
    spec: DetectorSpec,
    registry: ClassRegistry = DEFAULT_REGISTRY,
    latency_s: float = 0.0,
) -> ScriptedBackend:
    """Parse a detection-script file into a replayable backend.

    One JSON object per line: {"frame": int>=0, "label": str,
    "box": [x_min, y_min, x_max, y_max], "score": float, "space": [w, h]}.
    "space" declares the coordinate space of "box". Unknown fields are
    rejected. Order within a frame is preserved.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"detection script not found: {path}")
    entries: dict[int, list[_ScriptEntry]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScriptParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise ScriptParseError(path, line_no, "record must be a JSON object")
            unknown = set(record) - _SCRIPT_FIELDS
            if unknown:
                raise SchemaError(f"{path}:{line_no}: unknown fields {sorted(unknown)}")
            missing = _SCRIPT_FIELDS - set(record)
            if missing:
                raise SchemaError(f"{path}:{line_no}: missing fields {sorted(missing)}")

            frame_idx = record["frame"]
            if not isinstance(frame_idx, int) or frame_idx < 0:
                raise SchemaError(f"{path}:{line_no}: frame must be an integer >= 0")
            label = record["label"]
            if label not in registry:
                raise SchemaError(f"{path}:{line_no}: unknown class label {label!r}")
            score = record["score"]
            if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
                raise SchemaError(f"{path}:{line_no}: score must be in [0, 1]")
            space = record["space"]
            if (
                not isinstance(space, list)
                or len(space) != 2
                or not all(isinstance(v, int) and v >= 1 for v in space)
            ):
                raise SchemaError(f"{path}:{line_no}: space must be [width, height] of integers >= 1")
            box = record["box"]
            if not isinstance(box, list) or len(box) != 4 or not all(
                isinstance(v, (int, float)) for v in box
            ):
                raise SchemaError(f"{path}:{line_no}: box must be [x_min, y_min, x_max, y_max]")
            x0, y0, x1, y1 = (float(v) for v in box)
            if not (x0 < x1 and y0 < y1):
                raise SchemaError(f"{path}:{line_no}: box must have positive area")
            w, h = float(space[0]), float(space[1])
            entries.setdefault(frame_idx, []).append(
                _ScriptEntry(label, (x0 / w, y0 / h, x1 / w, y1 / h), float(score))
            )
    return ScriptedBackend(spec, entries, latency_s=latency_s)


class OnnxBackend(DetectorBackend):
    """Optional adapter running ONNX detector weights.

    Expects a model taking one float32 NCHW RGB tensor of the spec's input
    size and returning an (N, 6) array of (x_min, y_min, x_max, y_max,
    score, class_index) rows in input-space pixels; class_index addresses
    `class_order`. Requires the `onnxruntime` package, imported lazily so the
    core carries no inference dependency.
    """

    needs_pixels = True

    def __init__(self, spec: DetectorSpec, model_path: str | Path, class_order: Sequence[str]):
        try:
            import onnxruntime  # type: ignore
        except ImportError as exc:
            raise BackendError(
                spec.name, "onnxruntime is not installed; the ONNX backend is optional"
            ) from exc
        self.spec = spec
        self._class_order = list(class_order)
        self._session = onnxruntime.InferenceSession(str(model_path))
        self._input_name = self._session.get_inputs()[0].name

    def infer(self, frame: Frame) -> list[Detection]:
        from PIL import Image

        img = Image.fromarray(frame.image).convert("RGB")
        img = img.resize((self.spec.input_size.width, self.spec.input_size.height))
        tensor = np.asarray(img, dtype=np.float32).transpose(2, 0, 1)[None] / 255.0
        (rows,) = self._session.run(None, {self._input_name: tensor})
        out = []
        for x0, y0, x1, y1, score, cls_idx in np.asarray(rows).reshape(-1, 6):
            label = self._class_order[int(cls_idx)]
            out.append(Detection(label, BBox(float(x0), float(y0), float(x1), float(y1)), float(score)))
        return out

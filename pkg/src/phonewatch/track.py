"""Multi-object tracking: persistent IDs for detections across frames.

Tracking-by-detection with a constant-velocity Kalman filter over the state
(center_x, center_y, aspect_ratio, height) plus velocities, and an exact
one-to-one assignment on an IoU cost matrix. Appearance affinity is a
pluggable hook; the default cost is IoU-only, which keeps the tracker fully
deterministic and free of any learned model.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detect import Detection
from .errors import PhonewatchError, SequencingError
from .geometry import BBox, iou

#: Cost assigned to forbidden (gated or cross-class) pairs; any feasible
#: matching avoids these, matches carrying it are discarded afterwards.
_FORBIDDEN = 1e9

#: Affinity hook signature: (track, detection) -> cost in [0, 1] added to the
#: IoU cost, e.g. an appearance-embedding distance.
AffinityHook = Callable[["Track", Detection], float]


@dataclass(frozen=True)
class TrackerConfig:
    max_age: int = 30
    n_init: int = 3
    gate_iou: float = 0.3
    per_class: bool = True
    # Motion-noise scales relative to box height; conventional values for
    # this state parameterization.
    pos_weight: float = 1.0 / 20.0
    vel_weight: float = 1.0 / 160.0

    def __post_init__(self):
        if self.max_age < 1:
            raise PhonewatchError(f"max_age must be >= 1, got {self.max_age}")
        if self.n_init < 1:
            raise PhonewatchError(f"n_init must be >= 1, got {self.n_init}")
        if not 0.0 < self.gate_iou < 1.0:
            raise PhonewatchError(f"gate_iou must be in (0, 1), got {self.gate_iou}")


class TrackStatus(Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


def box_to_state(box: BBox) -> np.ndarray:
    """Measurement vector (center_x, center_y, aspect_ratio, height)."""
    cx, cy = box.center
    return np.array([cx, cy, box.width / box.height, box.height], dtype=float)


def state_to_box(mean: np.ndarray) -> BBox:
    cx, cy, aspect, h = mean[:4]
    w = max(aspect * h, 1e-6)
    h = max(h, 1e-6)
    return BBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


class KalmanBoxFilter:
    """Constant-velocity filter over the 8-dimensional box state."""

    def __init__(self, pos_weight: float = 1.0 / 20.0, vel_weight: float = 1.0 / 160.0):
        self._pos = pos_weight
        self._vel = vel_weight
        self._motion = np.eye(8)
        for i in range(4):
            self._motion[i, i + 4] = 1.0
        self._project = np.eye(4, 8)

    def initiate(self, box: BBox) -> tuple[np.ndarray, np.ndarray]:
        measurement = box_to_state(box)
        mean = np.zeros(8)
        mean[:4] = measurement
        h = measurement[3]
        std = np.array(
            [
                2 * self._pos * h,
                2 * self._pos * h,
                1e-2,
                2 * self._pos * h,
                10 * self._vel * h,
                10 * self._vel * h,
                1e-5,
                10 * self._vel * h,
            ]
        )
        return mean, np.diag(std**2)

    def predict(self, mean: np.ndarray, cov: np.ndarray, dt: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Advance by `dt` frames; each frame applies one constant-velocity
        step with process noise, so predict(dt=2) equals two dt=1 calls."""
        if dt < 1:
            raise PhonewatchError(f"dt must be >= 1, got {dt}")
        for _ in range(dt):
            h = mean[3]
            std = np.array(
                [
                    self._pos * h,
                    self._pos * h,
                    1e-2,
                    self._pos * h,
                    self._vel * h,
                    self._vel * h,
                    1e-5,
                    self._vel * h,
                ]
            )
            mean = self._motion @ mean
            cov = self._motion @ cov @ self._motion.T + np.diag(std**2)
        return mean, cov

    def update(self, mean: np.ndarray, cov: np.ndarray, box: BBox) -> tuple[np.ndarray, np.ndarray]:
        measurement = box_to_state(box)
        h = mean[3]
        std = np.array([self._pos * h, self._pos * h, 1e-1, self._pos * h])
        innovation_cov = self._project @ cov @ self._project.T + np.diag(std**2)
        gain = np.linalg.solve(innovation_cov.T, (cov @ self._project.T).T).T
        innovation = measurement - self._project @ mean
        mean = mean + gain @ innovation
        cov = cov - gain @ innovation_cov @ gain.T
        cov = 0.5 * (cov + cov.T)  # keep symmetric PSD under rounding
        return mean, cov


@dataclass
class Track:
    """Persistent identity across frames. Mutated only by its Tracker."""

    id: int
    label: str
    mean: np.ndarray
    cov: np.ndarray
    status: TrackStatus
    age: int = 0
    misses: int = 0
    hits: int = 1

    @property
    def box(self) -> BBox:
        return state_to_box(self.mean)

    @property
    def confirmed(self) -> bool:
        return self.status is TrackStatus.CONFIRMED


def associate(
    tracks: Sequence[Track],
    detections: Sequence[Detection],
    gate_iou: float,
    per_class: bool = True,
    affinity: Optional[AffinityHook] = None,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Exact one-to-one assignment maximizing total IoU.

    Pairs with IoU below `gate_iou` (or, when `per_class`, with differing
    labels) are forbidden. Returns (matches as (track_idx, det_idx) pairs,
    unmatched track indices, unmatched detection indices). Tracks should be
    supplied in id order; the assignment is then deterministic.
    """
    if not tracks or not detections:
        return [], list(range(len(tracks))), list(range(len(detections)))

    cost = np.full((len(tracks), len(detections)), _FORBIDDEN)
    for ti, track in enumerate(tracks):
        tbox = track.box
        for di, det in enumerate(detections):
            if per_class and track.label != det.label:
                continue
            overlap = iou(tbox, det.box)
            if overlap < gate_iou:
                continue
            cost[ti, di] = -overlap
            if affinity is not None:
                cost[ti, di] += affinity(track, det)

    rows, cols = linear_sum_assignment(cost)
    matches = [(int(r), int(c)) for r, c in zip(rows, cols) if cost[r, c] < _FORBIDDEN]
    matched_t = {r for r, _ in matches}
    matched_d = {c for _, c in matches}
    unmatched_tracks = [i for i in range(len(tracks)) if i not in matched_t]
    unmatched_dets = [i for i in range(len(detections)) if i not in matched_d]
    return matches, unmatched_tracks, unmatched_dets


class Tracker:
    """Tracks one stream. Calls to `step` must be serialized per stream.

    Several trackers may share an `id_source` so that independent per-class
    track sets draw from one ID counter per stream.
    """

    def __init__(
        self,
        config: TrackerConfig = TrackerConfig(),
        id_source: Optional[Iterator[int]] = None,
        affinity: Optional[AffinityHook] = None,
    ):
        self.config = config
        self._ids = id_source if id_source is not None else itertools.count(1)
        self._affinity = affinity
        self._kf = KalmanBoxFilter(config.pos_weight, config.vel_weight)
        self.tracks: dict[int, Track] = {}
        self.last_frame_index: Optional[int] = None
        #: Per input detection of the last step: the id of the track it was
        #: matched to or spawned as.
        self.last_assignments: list[int] = []
        #: Tracks removed during the last step (lifecycle deletions).
        self.removed_track_ids: list[int] = []

    def predict(self, dt: int = 1) -> None:
        """Advance every live track by `dt` frames; misses unchanged."""
        for track in self.tracks.values():
            track.mean, track.cov = self._kf.predict(track.mean, track.cov, dt)
            track.age += dt

    def step(self, frame_index: int, detections: Sequence[Detection]) -> list[Track]:
        """Predict, associate, update; returns the confirmed tracks in id order."""
        if self.last_frame_index is not None and frame_index <= self.last_frame_index:
            raise SequencingError(
                f"frame_index {frame_index} not after {self.last_frame_index}"
            )
        dt = 1 if self.last_frame_index is None else frame_index - self.last_frame_index
        self.last_frame_index = frame_index

        self.predict(dt)

        ordered = sorted(self.tracks.values(), key=lambda t: t.id)
        matches, unmatched_tracks, unmatched_dets = associate(
            ordered, detections, self.config.gate_iou, self.config.per_class, self._affinity
        )

        self.last_assignments = [-1] * len(detections)
        for ti, di in matches:
            track = ordered[ti]
            track.mean, track.cov = self._kf.update(track.mean, track.cov, detections[di].box)
            track.hits += 1
            track.misses = 0
            if track.status is TrackStatus.TENTATIVE and track.hits >= self.config.n_init:
                track.status = TrackStatus.CONFIRMED
            self.last_assignments[di] = track.id

        self.removed_track_ids = []
        for ti in unmatched_tracks:
            track = ordered[ti]
            track.misses += 1
            if track.misses > self.config.max_age:
                track.status = TrackStatus.DELETED
                del self.tracks[track.id]
                self.removed_track_ids.append(track.id)

        for di in unmatched_dets:
            det = detections[di]
            mean, cov = self._kf.initiate(det.box)
            status = (
                TrackStatus.CONFIRMED if self.config.n_init <= 1 else TrackStatus.TENTATIVE
            )
            track = Track(next(self._ids), det.label, mean, cov, status)
            self.tracks[track.id] = track
            self.last_assignments[di] = track.id

        return [t for t in sorted(self.tracks.values(), key=lambda t: t.id) if t.confirmed]

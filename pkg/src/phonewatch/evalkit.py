"""Detector evaluation: IoU-thresholded TP/FP, precision/recall, 11-point
interpolated average precision, and the FPS benchmark protocol.

The matching rule is the PASCAL VOC convention: detections are sorted in
descending order by confidence score, each is matched to the ground-truth
box of its class in its image with the highest IoU, and counts as a true
positive iff that IoU reaches the threshold and the box has not already been
claimed by an earlier detection. Each ground-truth box is matched at most
once; unmatched ground truth counts as false negatives. A detection exactly
at the IoU threshold counts as a true positive.

AP is the mean of interpolated precision over the eleven recall levels
{0, 0.1, ..., 1}, where the interpolated precision at level r is the
maximum precision among curve points with recall >= r and 0 when no point
reaches r. Reports at thresholds 0.5 and 0.1 give the AP50/AP10 pair; the
low threshold suits very small objects whose boxes rarely overlap tightly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DegenerateInputError, PhonewatchError, SchemaError
from .geometry import BBox, iou
from .pipeline import Pipeline

DEFAULT_THRESHOLDS = (0.5, 0.1)

_RECALL_LEVELS = tuple(i / 10 for i in range(11))


@dataclass(frozen=True)
class Prediction:
    image: str
    label: str
    box: BBox
    score: float


class GroundTruthSet:
    """Ground-truth boxes grouped by image and class."""

    def __init__(self):
        self._boxes: dict[tuple[str, str], list[BBox]] = {}
        self.images: set[str] = set()
        self.classes: set[str] = set()

    def add(self, image: str, label: str, box: BBox) -> None:
        self._boxes.setdefault((image, label), []).append(box)
        self.images.add(image)
        self.classes.add(label)

    def boxes(self, image: str, label: str) -> list[BBox]:
        return self._boxes.get((image, label), [])

    def total(self, label: str) -> int:
        return sum(len(v) for (_, lbl), v in self._boxes.items() if lbl == label)


def _parse_box(value, where: str) -> BBox:
    if not isinstance(value, list) or len(value) != 4 or not all(
        isinstance(v, (int, float)) for v in value
    ):
        raise SchemaError(f"{where}: box must be [x_min, y_min, x_max, y_max]")
    x0, y0, x1, y1 = (float(v) for v in value)
    if not (x0 < x1 and y0 < y1):
        raise SchemaError(f"{where}: box must have positive area")
    return BBox(x0, y0, x1, y1)


def _read_jsonl(path: Path, required: set[str]):
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        where = f"{path}:{line_no}"
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{where}: invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise SchemaError(f"{where}: record must be a JSON object")
        if set(record) != required:
            raise SchemaError(
                f"{where}: expected exactly fields {sorted(required)}, got {sorted(record)}"
            )
        yield where, record


def load_ground_truth(path: str | Path) -> GroundTruthSet:
    """JSON lines of {"image", "label", "box"}."""
    gt = GroundTruthSet()
    for where, record in _read_jsonl(Path(path), {"image", "label", "box"}):
        if not isinstance(record["image"], str) or not isinstance(record["label"], str):
            raise SchemaError(f"{where}: image and label must be strings")
        gt.add(record["image"], record["label"], _parse_box(record["box"], where))
    return gt


def load_predictions(path: str | Path) -> list[Prediction]:
    """JSON lines of {"image", "label", "box", "score"}; file order is the tie-break."""
    out = []
    for where, record in _read_jsonl(Path(path), {"image", "label", "box", "score"}):
        score = record["score"]
        if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
            raise SchemaError(f"{where}: score must be in [0, 1]")
        out.append(
            Prediction(record["image"], record["label"], _parse_box(record["box"], where), float(score))
        )
    return out


def assign_tp_fp(
    predictions: Sequence[Prediction],
    gt: GroundTruthSet,
    iou_threshold: float,
) -> list[tuple[Prediction, bool]]:
    """Order detections by descending score and mark each TP or FP.

    Ties in score keep input order (stable sort), so results are
    deterministic across runs and languages.
    """
    for pred in predictions:
        if pred.label not in gt.classes:
            raise SchemaError(f"prediction class {pred.label!r} absent from ground truth")

    ordered = sorted(predictions, key=lambda p: -p.score)
    claimed: dict[tuple[str, str], list[bool]] = {}
    out: list[tuple[Prediction, bool]] = []
    for pred in ordered:
        candidates = gt.boxes(pred.image, pred.label)
        if not candidates:
            out.append((pred, False))
            continue
        flags = claimed.setdefault((pred.image, pred.label), [False] * len(candidates))
        best_iou = -1.0
        best_idx = -1
        for idx, gt_box in enumerate(candidates):
            overlap = iou(pred.box, gt_box)
            if overlap > best_iou:
                best_iou = overlap
                best_idx = idx
        if best_iou >= iou_threshold and not flags[best_idx]:
            flags[best_idx] = True
            out.append((pred, True))
        else:
            out.append((pred, False))
    return out


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    tp: int
    fp: int
    score_at: float


def precision_recall(
    assignments: Sequence[tuple[Prediction, bool]], total_gt: int
) -> list[PRPoint]:
    """Cumulative precision/recall at each prefix of the sorted detections."""
    if total_gt == 0:
        if assignments:
            raise DegenerateInputError("no ground truth for class but detections present")
        return []
    points = []
    tp = 0
    fp = 0
    for pred, is_tp in assignments:
        if is_tp:
            tp += 1
        else:
            fp += 1
        points.append(
            PRPoint(
                recall=tp / total_gt,
                precision=tp / (tp + fp),
                tp=tp,
                fp=fp,
                score_at=pred.score,
            )
        )
    return points


def average_precision(pr_curve: Sequence[PRPoint]) -> float:
    """Mean interpolated precision over the eleven equally spaced recall levels."""
    total = 0.0
    for level in _RECALL_LEVELS:
        best = 0.0
        for point in pr_curve:
            if point.recall >= level and point.precision > best:
                best = point.precision
        total += best
    return total / len(_RECALL_LEVELS)


@dataclass(frozen=True)
class EvalReport:
    label: str
    iou_threshold: float
    ap: float
    pr_curve: tuple[PRPoint, ...]
    total_gt: int
    detections: int
    tp: int
    fp: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "iou_threshold": self.iou_threshold,
            "ap": self.ap,
            "total_gt": self.total_gt,
            "detections": self.detections,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "pr_curve": [
                {
                    "recall": p.recall,
                    "precision": p.precision,
                    "tp": p.tp,
                    "fp": p.fp,
                    "score_at": p.score_at,
                }
                for p in self.pr_curve
            ],
        }


def evaluate_sets(
    predictions: Sequence[Prediction],
    gt: GroundTruthSet,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> list[EvalReport]:
    """One report per (class, IoU threshold) over already-loaded inputs."""
    reports = []
    for label in sorted(gt.classes):
        class_preds = [p for p in predictions if p.label == label]
        total_gt = gt.total(label)
        for threshold in thresholds:
            assignments = assign_tp_fp(class_preds, gt, threshold)
            curve = precision_recall(assignments, total_gt)
            tp = curve[-1].tp if curve else 0
            fp = curve[-1].fp if curve else 0
            reports.append(
                EvalReport(
                    label=label,
                    iou_threshold=threshold,
                    ap=average_precision(curve),
                    pr_curve=tuple(curve),
                    total_gt=total_gt,
                    detections=len(class_preds),
                    tp=tp,
                    fp=fp,
                    fn=total_gt - tp,
                )
            )
    return reports


def evaluate(
    pred_path: str | Path,
    gt_path: str | Path,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> list[EvalReport]:
    """Evaluate a prediction file against a ground-truth file."""
    gt = load_ground_truth(gt_path)
    predictions = load_predictions(pred_path)
    return evaluate_sets(predictions, gt, thresholds)


def mean_ap(reports: Iterable[EvalReport]) -> dict[float, float]:
    """Convenience mAP per threshold when a report covers several classes."""
    by_threshold: dict[float, list[float]] = {}
    for report in reports:
        by_threshold.setdefault(report.iou_threshold, []).append(report.ap)
    return {thr: sum(aps) / len(aps) for thr, aps in by_threshold.items()}


@dataclass(frozen=True)
class BenchmarkResult:
    variant: str
    frames: int
    wall_seconds: float
    mean_fps: float
    stage_means_us: dict[str, float]
    config_summary: str
    valid: bool = True

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "frames": self.frames,
            "wall_seconds": self.wall_seconds,
            "mean_fps": self.mean_fps,
            "stage_means_us": self.stage_means_us,
            "config_summary": self.config_summary,
            "valid": self.valid,
        }


def benchmark(
    pipeline: Pipeline,
    source,
    variant: str,
    exclude_decode: bool = False,
) -> BenchmarkResult:
    """Run the whole source through `pipeline` and report mean FPS.

    Wall clock covers decode and processing end to end unless
    `exclude_decode`, in which case decode time is subtracted from the
    measurement window so mean_fps stays frames/wall_seconds. Benchmarks
    should run exclusively in a process; concurrent benchmarks disturb each
    other's timing.
    """
    summary_text = (
        f"mode={pipeline.mode.value} tracking={pipeline.tracking} "
        f"backend={pipeline.primary.spec.name}"
    )
    started = time.perf_counter()
    try:
        summary = pipeline.run_stream(source)
    except PhonewatchError as exc:
        wall = time.perf_counter() - started
        return BenchmarkResult(
            variant=variant,
            frames=0,
            wall_seconds=wall,
            mean_fps=0.0,
            stage_means_us={},
            config_summary=f"{summary_text} error={exc}",
            valid=False,
        )
    wall = summary.wall_seconds
    if exclude_decode and "decode" in summary.stage_means_us:
        wall = max(wall - summary.stage_means_us["decode"] * summary.frames / 1e6, 1e-9)
    return BenchmarkResult(
        variant=variant,
        frames=summary.frames,
        wall_seconds=wall,
        mean_fps=summary.frames / wall if wall > 0 else 0.0,
        stage_means_us=summary.stage_means_us,
        config_summary=summary_text,
        valid=True,
    )

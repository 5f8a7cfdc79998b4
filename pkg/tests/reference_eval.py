"""Independent brute-force reference for the evaluation metrics.

Deliberately shares no code with the package: plain tuples, its own IoU,
direct enumeration of score prefixes and a literal reading of the 11-point
interpolation. Used as the oracle the production implementation is checked
against.
"""

from __future__ import annotations


def ref_iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    return inter / (area_a + area_b - inter)


def ref_assign(detections, ground_truth, threshold):
    """detections: (image, box, score) triples; ground_truth: (image, box).

    Returns the TP/FP flag list in descending-score order (stable on ties).
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i][2])
    used = [False] * len(ground_truth)
    flags = []
    for i in order:
        image, box, _ = detections[i]
        best_iou = -1.0
        best_j = -1
        for j, (gt_image, gt_box) in enumerate(ground_truth):
            if gt_image != image:
                continue
            overlap = ref_iou(box, gt_box)
            if overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j >= 0 and best_iou >= threshold and not used[best_j]:
            used[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def ref_average_precision(detections, ground_truth, threshold) -> float:
    """AP by direct prefix enumeration and literal 11-level interpolation."""
    total_gt = len(ground_truth)
    flags = ref_assign(detections, ground_truth, threshold)
    prefix_points = []
    tp = 0
    for k, flag in enumerate(flags, start=1):
        if flag:
            tp += 1
        prefix_points.append((tp / total_gt, tp / k))
    ap = 0.0
    for i in range(11):
        level = i / 10
        best = 0.0
        for recall, precision in prefix_points:
            if recall >= level and precision > best:
                best = precision
        ap += best
    return ap / 11.0

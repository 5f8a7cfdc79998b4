"""Rendering of evaluation and benchmark results.

Human-readable tables go to stdout; the report path also writes machine JSON
(floats at full round-trip precision), delimited CSV, and matplotlib figures
(PR curves, AP summary bars, FPS comparison bars) next to each other in the
chosen output directory. AP values are shown as percentages in tables and
figures; machine outputs keep the raw [0, 1] values.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evalkit import BenchmarkResult, EvalReport, mean_ap

log = logging.getLogger(__name__)

_VARIANT_COLUMNS = {
    "detection": "FPS (detection only)",
    "tracking": "FPS (with tracking)",
    "two-step": "FPS (with tracking & two-step)",
}


def _ap_label(threshold: float) -> str:
    return f"AP{int(round(threshold * 100))}"


def _fmt_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def line(cells):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip()
    sep = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return "\n".join([line(headers), sep] + [line(r) for r in rows])


def eval_table(
    reports: Sequence[EvalReport],
    cropped: Optional[Sequence[EvalReport]] = None,
) -> str:
    """AP table, one row per class; a second eval set adds "cropped" columns."""
    thresholds = []
    for report in reports:
        if report.iou_threshold not in thresholds:
            thresholds.append(report.iou_threshold)
    headers = ["Class"] + [_ap_label(t) for t in thresholds]
    if cropped is not None:
        headers += [f"{_ap_label(t)} cropped" for t in thresholds]

    by_class: dict[str, dict[float, float]] = {}
    for report in reports:
        by_class.setdefault(report.label, {})[report.iou_threshold] = report.ap
    cropped_by_class: dict[str, dict[float, float]] = {}
    for report in cropped or ():
        cropped_by_class.setdefault(report.label, {})[report.iou_threshold] = report.ap

    rows = []
    for label in sorted(by_class):
        row = [label] + [f"{by_class[label].get(t, 0.0) * 100:.2f}" for t in thresholds]
        if cropped is not None:
            row += [
                f"{cropped_by_class.get(label, {}).get(t, 0.0) * 100:.2f}" for t in thresholds
            ]
        rows.append(row)
    if len(by_class) > 1:
        maps = mean_ap(reports)
        row = ["mAP"] + [f"{maps.get(t, 0.0) * 100:.2f}" for t in thresholds]
        if cropped is not None:
            cropped_maps = mean_ap(cropped)
            row += [f"{cropped_maps.get(t, 0.0) * 100:.2f}" for t in thresholds]
        rows.append(row)
    return _fmt_table(headers, rows)


def _plot_pr_curve(report: EvalReport, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    recalls = [0.0] + [p.recall for p in report.pr_curve]
    precisions = [1.0] + [p.precision for p in report.pr_curve]
    ax.step(recalls, precisions, where="post")
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title(
        f"{report.label} @ IoU>{report.iou_threshold:g} "
        f"({_ap_label(report.iou_threshold)} = {report.ap * 100:.2f})"
    )
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_ap_summary(reports: Sequence[EvalReport], path: Path) -> None:
    labels = sorted({r.label for r in reports})
    thresholds = sorted({r.iou_threshold for r in reports}, reverse=True)
    fig, ax = plt.subplots(figsize=(max(5, 1.8 * len(labels)), 4))
    width = 0.8 / max(len(thresholds), 1)
    for k, threshold in enumerate(thresholds):
        values = []
        for label in labels:
            match = [r.ap for r in reports if r.label == label and r.iou_threshold == threshold]
            values.append(match[0] * 100 if match else 0.0)
        positions = [i + k * width for i in range(len(labels))]
        ax.bar(positions, values, width=width, label=_ap_label(threshold))
    ax.set_xticks([i + width * (len(thresholds) - 1) / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels)
    ax.set_ylabel("AP (%)")
    ax.set_ylim(0, 105)
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_eval_outputs(
    reports: Sequence[EvalReport],
    out_dir: str | Path,
    cropped: Optional[Sequence[EvalReport]] = None,
) -> list[Path]:
    """Write report.json, pr_points.csv and figures; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    payload = {
        "reports": [r.to_dict() for r in reports],
        "mean_ap": {str(t): v for t, v in mean_ap(reports).items()},
    }
    if cropped is not None:
        payload["cropped_reports"] = [r.to_dict() for r in cropped]
        payload["cropped_mean_ap"] = {str(t): v for t, v in mean_ap(cropped).items()}
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    written.append(json_path)

    csv_path = out_dir / "pr_points.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["set", "class", "iou_threshold", "score_at", "recall", "precision", "tp", "fp"])
        for name, batch in (("full", reports), ("cropped", cropped or ())):
            for report in batch:
                for point in report.pr_curve:
                    writer.writerow(
                        [
                            name,
                            report.label,
                            repr(report.iou_threshold),
                            repr(point.score_at),
                            repr(point.recall),
                            repr(point.precision),
                            point.tp,
                            point.fp,
                        ]
                    )
    written.append(csv_path)

    for suffix, batch in (("", reports), ("_cropped", cropped or ())):
        for report in batch:
            fig_path = out_dir / (
                f"pr_curve_{report.label}_{_ap_label(report.iou_threshold).lower()}{suffix}.png"
            )
            _plot_pr_curve(report, fig_path)
            written.append(fig_path)
        if batch:
            summary_path = out_dir / f"ap_summary{suffix}.png"
            _plot_ap_summary(batch, summary_path)
            written.append(summary_path)
    return written


def benchmark_table(results: Sequence[BenchmarkResult]) -> str:
    """FPS comparison; the canonical three variants render as one wide row."""
    by_variant = {r.variant: r for r in results}
    if set(by_variant) == set(_VARIANT_COLUMNS) and len(results) == 3:
        headers = [_VARIANT_COLUMNS[v] for v in ("detection", "tracking", "two-step")]
        row = [f"{by_variant[v].mean_fps:.2f}" for v in ("detection", "tracking", "two-step")]
        return _fmt_table(headers, [row])
    headers = ["Variant", "Frames", "Wall s", "Mean FPS", "Valid"]
    rows = [
        [r.variant, str(r.frames), f"{r.wall_seconds:.3f}", f"{r.mean_fps:.2f}", str(r.valid)]
        for r in results
    ]
    return _fmt_table(headers, rows)


def _plot_fps(results: Sequence[BenchmarkResult], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(max(5, 1.6 * len(results)), 4))
    names = [r.variant for r in results]
    values = [r.mean_fps for r in results]
    ax.bar(range(len(results)), values, width=0.6)
    ax.set_xticks(range(len(results)))
    ax.set_xticklabels(names)
    ax.set_ylabel("Mean FPS")
    for i, value in enumerate(values):
        ax.annotate(f"{value:.1f}", (i, value), ha="center", va="bottom")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


_STAGES = ("decode", "detect1", "crop", "detect2", "track")


def write_benchmark_outputs(results: Sequence[BenchmarkResult], out_dir: str | Path) -> list[Path]:
    """Write benchmark.json, benchmark.csv and the FPS bar figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    json_path = out_dir / "benchmark.json"
    json_path.write_text(
        json.dumps({"results": [r.to_dict() for r in results]}, indent=2) + "\n",
        encoding="utf-8",
    )
    written.append(json_path)

    csv_path = out_dir / "benchmark.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["variant", "frames", "wall_seconds", "mean_fps", "valid"]
            + [f"{s}_mean_us" for s in _STAGES]
        )
        for result in results:
            writer.writerow(
                [result.variant, result.frames, repr(result.wall_seconds), repr(result.mean_fps), result.valid]
                + [
                    repr(result.stage_means_us[s]) if s in result.stage_means_us else ""
                    for s in _STAGES
                ]
            )
    written.append(csv_path)

    fig_path = out_dir / "fps_variants.png"
    _plot_fps(results, fig_path)
    written.append(fig_path)
    return written

"""Single entry point: run, evaluate, benchmark and serve.

Exit codes: 0 ok, 1 config error, 2 input/data error, 3 bind failure,
64 usage error. Command-line options override the config file.
"""

from __future__ import annotations

import dataclasses
import json
import socket
import sys
import threading

import click

from .config import EngineConfig, config_to_yaml, load_config
from .errors import ConfigError, InputError, PhonewatchError, SchemaError
from .evalkit import DEFAULT_THRESHOLDS, benchmark, evaluate
from .pipeline import DirectoryFrameSource, PipelineMode
from .report import benchmark_table, eval_table, write_benchmark_outputs, write_eval_outputs

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_BIND = 3
EXIT_USAGE = 64

_MODE_FLAGS = {"single": PipelineMode.SINGLE_STEP, "two": PipelineMode.TWO_STEP}

BENCHMARK_VARIANTS = ("detection", "tracking", "two-step")


class BindError(PhonewatchError):
    pass


@click.group()
def cli():
    """Driver phone-use violation engine."""


def _load(config_path: str, mode_flag: str | None) -> EngineConfig:
    config = load_config(config_path)
    if mode_flag is not None:
        config = dataclasses.replace(config, mode=_MODE_FLAGS[mode_flag])
    return config


@cli.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Engine config file.")
@click.option("--input", "input_path", type=click.Path(), help="Directory of numbered frames.")
@click.option("--mode", "mode_flag", type=click.Choice(sorted(_MODE_FLAGS)), default=None,
              help="Override the configured pipeline mode.")
@click.option("--print-config", is_flag=True, help="Echo the normalized config and exit.")
def run_cmd(config_path, input_path, mode_flag, print_config):
    """Process a frame stream and log unique violations."""
    config = _load(config_path, mode_flag)
    if print_config:
        click.echo(config_to_yaml(config), nl=False)
        return
    if input_path is None:
        raise click.UsageError("--input is required unless --print-config is given")
    source = DirectoryFrameSource(input_path, fps=config.input.fps, start=config.input.start)
    pipeline = config.build_pipeline()
    store = config.build_store()
    try:
        summary = pipeline.run_stream(source, subscribers=[store.ingest])
    finally:
        store.close()
    click.echo(
        f"frames: {summary.frames}, fps: {summary.mean_fps:.2f}, "
        f"violations: {store.total_violations()}, vehicles: {store.total_vehicles()}"
    )
    if summary.skipped:
        click.echo(f"warning: {summary.skipped} frames skipped", err=True)
        raise click.exceptions.Exit(EXIT_INPUT)


def _parse_thresholds(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.UsageError(f"--iou expects comma-separated numbers, got {text!r}")
    if not values or any(not 0.0 < v <= 1.0 for v in values):
        raise click.UsageError("--iou thresholds must lie in (0, 1]")
    return values


@cli.command("evaluate")
@click.option("--gt", "gt_path", required=True, type=click.Path(), help="Ground-truth JSONL file.")
@click.option("--pred", "pred_path", required=True, type=click.Path(), help="Prediction JSONL file.")
@click.option("--iou", "iou_text", default=",".join(str(t) for t in DEFAULT_THRESHOLDS),
              show_default=True, help="Comma-separated IoU thresholds.")
@click.option("--cropped-gt", type=click.Path(), default=None,
              help="Ground truth for the cropped-windscreen eval set.")
@click.option("--cropped-pred", type=click.Path(), default=None,
              help="Predictions for the cropped-windscreen eval set.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable JSON to stdout.")
@click.option("--report-dir", type=click.Path(), default=None,
              help="Write JSON/CSV/figures into this directory.")
def evaluate_cmd(gt_path, pred_path, iou_text, cropped_gt, cropped_pred, as_json, report_dir):
    """Score predictions against ground truth (AP per class and threshold)."""
    thresholds = _parse_thresholds(iou_text)
    if (cropped_gt is None) != (cropped_pred is None):
        raise click.UsageError("--cropped-gt and --cropped-pred must be given together")
    reports = evaluate(pred_path, gt_path, thresholds)
    cropped = evaluate(cropped_pred, cropped_gt, thresholds) if cropped_gt else None
    if as_json:
        payload = {"reports": [r.to_dict() for r in reports]}
        if cropped is not None:
            payload["cropped_reports"] = [r.to_dict() for r in cropped]
        click.echo(json.dumps(payload))
    else:
        click.echo(eval_table(reports, cropped))
    if report_dir:
        for path in write_eval_outputs(reports, report_dir, cropped):
            click.echo(f"wrote {path}", err=True)


@cli.command("benchmark")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--variant", "variants", multiple=True,
              type=click.Choice(BENCHMARK_VARIANTS), help="Repeatable; default: all three.")
@click.option("--exclude-decode", is_flag=True, help="Subtract decode time from the FPS window.")
@click.option("--json", "as_json", is_flag=True)
@click.option("--report-dir", type=click.Path(), default=None)
def benchmark_cmd(config_path, input_path, variants, exclude_decode, as_json, report_dir):
    """Mean-FPS comparison: detection only, with tracking, two-step."""
    config = load_config(config_path)
    chosen = variants or BENCHMARK_VARIANTS
    results = []
    for variant in chosen:
        mode = PipelineMode.TWO_STEP if variant == "two-step" else PipelineMode.SINGLE_STEP
        pipeline = config.build_pipeline(tracking=(variant != "detection"), mode=mode)
        source = DirectoryFrameSource(input_path, fps=config.input.fps, start=config.input.start)
        results.append(benchmark(pipeline, source, variant, exclude_decode=exclude_decode))
    if as_json:
        click.echo(json.dumps({"results": [r.to_dict() for r in results]}))
    else:
        click.echo(benchmark_table(results))
    if report_dir:
        for path in write_benchmark_outputs(results, report_dir):
            click.echo(f"wrote {path}", err=True)


@cli.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--input", "input_path", type=click.Path(), default=None,
              help="Attach a live pipeline over this frame directory.")
def serve_cmd(config_path, input_path):
    """Replay the record log and serve the review API."""
    import uvicorn

    from .server import ApiConfig, create_app

    config = load_config(config_path)
    store = config.build_store()
    app = create_app(
        store,
        ApiConfig(
            token=config.server.token,
            cors_origins=config.server.cors_origins,
            dashboard_dir=config.server.dashboard_dir,
        ),
    )

    if input_path is not None:
        source = DirectoryFrameSource(input_path, fps=config.input.fps, start=config.input.start)
        pipeline = config.build_pipeline()
        worker = threading.Thread(
            target=pipeline.run_stream,
            args=(source,),
            kwargs={"subscribers": [store.ingest]},
            daemon=True,
        )
        worker.start()

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((config.server.host, config.server.port))
    except OSError as exc:
        raise BindError(f"cannot bind {config.server.host}:{config.server.port}: {exc}") from exc
    finally:
        probe.close()

    import signal

    def _flush_and_exit(signum, frame):
        # uvicorn captures SIGTERM for its graceful shutdown and then
        # re-raises it with prior handlers restored; flushing here makes the
        # shutdown contract (pending writes durable, exit 0) hold.
        store.close()
        sys.exit(EXIT_OK)

    previous_handler = signal.signal(signal.SIGTERM, _flush_and_exit)
    try:
        uvicorn.run(app, host=config.server.host, port=config.server.port, log_level="warning")
    finally:
        signal.signal(signal.SIGTERM, previous_handler)
        store.close()


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (InputError, SchemaError) as exc:
        click.echo(f"input error: {exc}", err=True)
        return EXIT_INPUT
    except BindError as exc:
        click.echo(f"bind error: {exc}", err=True)
        return EXIT_BIND
    except PhonewatchError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

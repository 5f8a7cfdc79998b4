"""Engine configuration: one declarative YAML file with a published schema.

The file is validated against schemas/engine_config.schema.json before any
work starts; unknown keys are rejected. All paths are resolved relative to
the config file's directory so runs are reproducible from checked-in
fixtures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import yaml

from .detect import (
    LICENCE_PLATE,
    PHONE,
    WINDSCREEN,
    DetectorBackend,
    DetectorSpec,
    load_scripted_backend,
)
from .errors import ConfigError
from .geometry import FrameSize
from .pipeline import CropConfig, Pipeline, PipelineMode
from .track import TrackerConfig
from .viostore import SnapshotPolicy, ViolationStore, format_utc, parse_utc


def _schema() -> dict:
    text = resources.files("phonewatch").joinpath("schemas/engine_config.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class DetectorConfig:
    kind: str
    input_size: FrameSize
    classes: tuple[str, ...]
    score_threshold: float = 0.5
    script: Optional[Path] = None
    model: Optional[Path] = None
    latency_s: float = 0.0

    def spec(self, role: str) -> DetectorSpec:
        return DetectorSpec(
            name=f"{role}:{self.kind}",
            input_size=self.input_size,
            classes=frozenset(self.classes),
            score_threshold=self.score_threshold,
        )

    def build(self, role: str) -> DetectorBackend:
        if self.kind == "scripted":
            if self.script is None:
                raise ConfigError(f"detector '{role}': scripted backend needs a script path")
            return load_scripted_backend(self.script, self.spec(role), latency_s=self.latency_s)
        if self.kind == "onnx":
            if self.model is None:
                raise ConfigError(f"detector '{role}': onnx backend needs a model path")
            from .detect import OnnxBackend

            return OnnxBackend(self.spec(role), self.model, class_order=self.classes)
        raise ConfigError(f"detector '{role}': unknown kind {self.kind!r}")


@dataclass(frozen=True)
class StoreConfig:
    root: Path = Path("store")
    snapshot_policy: SnapshotPolicy = SnapshotPolicy.BEST_SCORE


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    token: Optional[str] = None
    cors_origins: tuple[str, ...] = ()
    dashboard_dir: Optional[Path] = None


@dataclass(frozen=True)
class InputConfig:
    fps: Optional[float] = None
    start: Optional[datetime] = None


@dataclass(frozen=True)
class EngineConfig:
    stream_id: str
    mode: PipelineMode
    detectors: dict[str, DetectorConfig]
    crop: CropConfig = CropConfig()
    tracker: TrackerConfig = TrackerConfig()
    store: StoreConfig = StoreConfig()
    server: ServerConfig = ServerConfig()
    input: InputConfig = InputConfig()

    def _detector(self, role: str) -> DetectorConfig:
        if role not in self.detectors:
            raise ConfigError(f"config defines no '{role}' detector")
        return self.detectors[role]

    def build_pipeline(self, tracking: bool = True, mode: Optional[PipelineMode] = None) -> Pipeline:
        mode = mode or self.mode
        if mode is PipelineMode.SINGLE_STEP:
            primary = self._detector("single").build("single")
            phone = None
        else:
            primary = self._detector("windscreen").build("windscreen")
            phone = self._detector("phone").build("phone")
        return Pipeline(
            mode,
            primary,
            phone=phone,
            crop=self.crop,
            tracker_config=self.tracker,
            tracking=tracking,
        )

    def build_store(self) -> ViolationStore:
        return ViolationStore(
            self.store.root,
            self.stream_id,
            mode=self.mode,
            snapshot_policy=self.store.snapshot_policy,
        )


def _detector_from_raw(raw: dict, base: Path) -> DetectorConfig:
    return DetectorConfig(
        kind=raw["kind"],
        input_size=FrameSize(raw["input_size"][0], raw["input_size"][1]),
        classes=tuple(raw["classes"]),
        score_threshold=raw.get("score_threshold", 0.5),
        script=(base / raw["script"]).resolve() if "script" in raw else None,
        model=(base / raw["model"]).resolve() if "model" in raw else None,
        latency_s=raw.get("latency_s", 0.0),
    )


def config_from_mapping(raw: dict, base_dir: str | Path) -> EngineConfig:
    """Validate a parsed mapping and build the config; paths resolve under base_dir."""
    base = Path(base_dir)
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        location = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {location}: {exc.message}") from exc

    mode = PipelineMode(raw["mode"])
    detectors = {
        role: _detector_from_raw(det, base) for role, det in raw["detectors"].items()
    }

    if mode is PipelineMode.SINGLE_STEP:
        if "single" not in detectors:
            raise ConfigError("single_step mode requires a 'single' detector")
        required = {PHONE, LICENCE_PLATE}
        if not required <= set(detectors["single"].classes):
            raise ConfigError(f"'single' detector must expose classes {sorted(required)}")
    else:
        if "windscreen" not in detectors or "phone" not in detectors:
            raise ConfigError("two_step mode requires 'windscreen' and 'phone' detectors")
        if WINDSCREEN not in detectors["windscreen"].classes:
            raise ConfigError("'windscreen' detector must expose class 'windscreen'")
        if PHONE not in detectors["phone"].classes:
            raise ConfigError("'phone' detector must expose class 'phone'")

    crop_raw = raw.get("crop", {})
    tracker_raw = raw.get("tracker", {})
    store_raw = raw.get("store", {})
    server_raw = raw.get("server", {})
    input_raw = raw.get("input", {})

    try:
        start = parse_utc(input_raw["start"]) if input_raw.get("start") else None
    except ValueError as exc:
        raise ConfigError(f"config invalid at input/start: {exc}") from exc

    return EngineConfig(
        stream_id=raw.get("stream_id", "default"),
        mode=mode,
        detectors=detectors,
        crop=CropConfig(
            side=crop_raw.get("side", "right"),
            fraction=crop_raw.get("fraction", 0.5),
            padding=crop_raw.get("padding", 0.0),
            min_pixels=crop_raw.get("min_pixels", 0),
        ),
        tracker=TrackerConfig(
            max_age=tracker_raw.get("max_age", 30),
            n_init=tracker_raw.get("n_init", 3),
            gate_iou=tracker_raw.get("gate_iou", 0.3),
            per_class=tracker_raw.get("per_class", True),
        ),
        store=StoreConfig(
            root=(base / store_raw.get("root", "store")).resolve(),
            snapshot_policy=SnapshotPolicy(store_raw.get("snapshot_policy", "best_score")),
        ),
        server=ServerConfig(
            host=server_raw.get("host", "127.0.0.1"),
            port=server_raw.get("port", 8080),
            token=server_raw.get("token"),
            cors_origins=tuple(server_raw.get("cors_origins", [])),
            dashboard_dir=(base / server_raw["dashboard_dir"]).resolve()
            if server_raw.get("dashboard_dir")
            else None,
        ),
        input=InputConfig(fps=input_raw.get("fps"), start=start),
    )


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return config_from_mapping(raw, path.parent)


def config_to_mapping(config: EngineConfig) -> dict:
    """Normalized mapping with absolute paths; reparses to an equal config."""
    detectors = {}
    for role, det in config.detectors.items():
        entry = {
            "kind": det.kind,
            "input_size": [det.input_size.width, det.input_size.height],
            "classes": list(det.classes),
            "score_threshold": det.score_threshold,
            "latency_s": det.latency_s,
        }
        if det.script is not None:
            entry["script"] = str(det.script)
        if det.model is not None:
            entry["model"] = str(det.model)
        detectors[role] = entry
    return {
        "stream_id": config.stream_id,
        "mode": config.mode.value,
        "detectors": detectors,
        "crop": {
            "side": config.crop.side,
            "fraction": config.crop.fraction,
            "padding": config.crop.padding,
            "min_pixels": config.crop.min_pixels,
        },
        "tracker": {
            "max_age": config.tracker.max_age,
            "n_init": config.tracker.n_init,
            "gate_iou": config.tracker.gate_iou,
            "per_class": config.tracker.per_class,
        },
        "store": {
            "root": str(config.store.root),
            "snapshot_policy": config.store.snapshot_policy.value,
        },
        "server": {
            "host": config.server.host,
            "port": config.server.port,
            "token": config.server.token,
            "cors_origins": list(config.server.cors_origins),
            "dashboard_dir": str(config.server.dashboard_dir)
            if config.server.dashboard_dir
            else None,
        },
        "input": {
            "fps": config.input.fps,
            "start": format_utc(config.input.start) if config.input.start else None,
        },
    }


def config_to_yaml(config: EngineConfig) -> str:
    return yaml.safe_dump(config_to_mapping(config), sort_keys=False)

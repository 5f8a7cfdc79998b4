import pytest
import yaml

import helpers
from phonewatch.config import config_from_mapping, config_to_yaml, load_config
from phonewatch.detect import LICENCE_PLATE, PHONE, WINDSCREEN
from phonewatch.errors import ConfigError
from phonewatch.geometry import FrameSize
from phonewatch.pipeline import PipelineMode


def write_two_step(tmp_path, **kwargs):
    helpers.write_script(tmp_path / "ws.jsonl", [])
    helpers.write_script(tmp_path / "phone.jsonl", [])
    return helpers.write_engine_config(
        tmp_path,
        mode="two_step",
        detectors={
            "windscreen": helpers.detector_entry("ws.jsonl", [WINDSCREEN]),
            "phone": helpers.detector_entry("phone.jsonl", [PHONE]),
        },
        **kwargs,
    )


class TestLoading:
    def test_valid_two_step_config(self, tmp_path):
        config = load_config(write_two_step(tmp_path))
        assert config.mode is PipelineMode.TWO_STEP
        assert config.stream_id == "cam-01"
        assert config.detectors["phone"].input_size == FrameSize(320, 320)
        assert config.detectors["phone"].script == (tmp_path / "phone.jsonl").resolve()
        assert config.store.root == (tmp_path / "store").resolve()
        assert config.input.fps == 10.0

    def test_unknown_key_rejected(self, tmp_path):
        path = write_two_step(tmp_path)
        raw = yaml.safe_load(path.read_text())
        raw["surprise"] = 1
        path.write_text(yaml.safe_dump(raw))
        with pytest.raises(ConfigError, match="surprise|additional"):
            load_config(path)

    def test_missing_mode_rejected(self, tmp_path):
        path = write_two_step(tmp_path)
        raw = yaml.safe_load(path.read_text())
        del raw["mode"]
        path.write_text(yaml.safe_dump(raw))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_mode_detector_consistency(self, tmp_path):
        helpers.write_script(tmp_path / "ws.jsonl", [])
        path = helpers.write_engine_config(
            tmp_path,
            mode="two_step",
            detectors={"windscreen": helpers.detector_entry("ws.jsonl", [WINDSCREEN])},
        )
        with pytest.raises(ConfigError, match="phone"):
            load_config(path)

    def test_single_mode_requires_both_classes(self, tmp_path):
        helpers.write_script(tmp_path / "single.jsonl", [])
        path = helpers.write_engine_config(
            tmp_path,
            mode="single_step",
            detectors={"single": helpers.detector_entry("single.jsonl", [PHONE])},
        )
        with pytest.raises(ConfigError, match="classes"):
            load_config(path)

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("mode: [unclosed")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_invalid_start_timestamp(self, tmp_path):
        path = write_two_step(tmp_path, start="not-a-date")
        with pytest.raises(ConfigError, match="start"):
            load_config(path)


class TestRoundTrip:
    def test_yaml_round_trips_to_identical_config(self, tmp_path):
        config = load_config(write_two_step(tmp_path))
        echoed = config_to_yaml(config)
        reparsed = config_from_mapping(yaml.safe_load(echoed), tmp_path)
        assert reparsed == config


class TestBuilders:
    def test_build_pipeline_and_store(self, tmp_path):
        config = load_config(write_two_step(tmp_path))
        pipeline = config.build_pipeline()
        assert pipeline.mode is PipelineMode.TWO_STEP
        store = config.build_store()
        assert store.basis == WINDSCREEN
        store.close()

    def test_mode_override_needs_matching_detectors(self, tmp_path):
        config = load_config(write_two_step(tmp_path))
        with pytest.raises((ConfigError, KeyError)):
            config.build_pipeline(mode=PipelineMode.SINGLE_STEP)

    def test_full_benchmark_config_builds_all_variants(self, tmp_path):
        helpers.write_script(tmp_path / "single.jsonl", [])
        helpers.write_script(tmp_path / "ws.jsonl", [])
        helpers.write_script(tmp_path / "phone.jsonl", [])
        path = helpers.write_engine_config(
            tmp_path,
            mode="single_step",
            detectors={
                "single": helpers.detector_entry("single.jsonl", [PHONE, LICENCE_PLATE]),
                "windscreen": helpers.detector_entry("ws.jsonl", [WINDSCREEN]),
                "phone": helpers.detector_entry("phone.jsonl", [PHONE]),
            },
        )
        config = load_config(path)
        assert config.build_pipeline(tracking=False).tracking is False
        assert config.build_pipeline(mode=PipelineMode.TWO_STEP).mode is PipelineMode.TWO_STEP

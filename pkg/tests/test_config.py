"""Run-config parsing, presets, validation, and derived model configs."""

import dataclasses

import pytest

from elstm_lab.cells import InputMode
from elstm_lab.config import (
    PRESETS,
    RunConfig,
    apply_preset,
    load_config,
    model_config_from,
    resolve_scale_period,
    validate,
)


class TestPresets:
    def test_overlay_keeps_unrelated_fields(self):
        cfg = apply_preset("lm", dataclasses.replace(RunConfig(), seed=42))
        assert cfg.task == "lm"
        assert cfg.batch_size == 50
        assert cfg.embedding_dim == 5
        assert cfg.seed == 42

    def test_all_presets_validate(self):
        for name in PRESETS:
            validate(apply_preset(name))

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            apply_preset("giant")


class TestLoadConfig:
    def write(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return path

    def test_parses_types_comments_and_blanks(self, tmp_path):
        path = self.write(
            tmp_path,
            "# a comment\n"
            "task = lm\n"
            "\n"
            "epochs = 7   # trailing comment\n"
            "learning_rate = 0.25\n"
            "dbrnn_feedback = true\n",
        )
        cfg = load_config(path)
        assert cfg.task == "lm"
        assert cfg.epochs == 7
        assert cfg.learning_rate == 0.25
        assert cfg.dbrnn_feedback is True

    def test_overlays_existing_config(self, tmp_path):
        base = apply_preset("toy")
        path = self.write(tmp_path, "epochs = 2\n")
        cfg = load_config(path, base)
        assert cfg.epochs == 2
        assert cfg.batch_size == base.batch_size

    def test_unknown_key_reports_line(self, tmp_path):
        path = self.write(tmp_path, "task = toy\nepochz = 3\n")
        with pytest.raises(ValueError, match=r"run\.cfg:2: unknown key 'epochz'"):
            load_config(path)

    def test_bad_value_and_missing_equals_collected_together(self, tmp_path):
        path = self.write(tmp_path, "epochs = soon\njust words\n")
        with pytest.raises(ValueError) as err:
            load_config(path)
        text = str(err.value)
        assert "cannot parse 'soon'" in text
        assert "expected 'key = value'" in text

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.cfg")


class TestValidate:
    def test_collects_every_failure(self):
        cfg = dataclasses.replace(
            RunConfig(),
            task="cooking",
            model="transformer",
            cell="mamba",
            input_mode="sideways",
            epochs=0,
            learning_rate=0.0,
            clip_norm=-1.0,
        )
        with pytest.raises(ValueError) as err:
            validate(cfg)
        assert len(str(err.value).splitlines()) == 7

    def test_valid_config_returned_unchanged(self):
        cfg = RunConfig()
        assert validate(cfg) is cfg


class TestScalePeriod:
    def cfg(self, **kw):
        return dataclasses.replace(RunConfig(), **kw)

    def test_explicit_value_wins(self):
        assert resolve_scale_period(self.cfg(task="lm", scale_period=17)) == 17

    def test_auto_rules(self):
        assert resolve_scale_period(self.cfg(task="toy", toy_length=42)) == 42
        assert resolve_scale_period(self.cfg(task="lm", scale_period=0)) == 3
        assert resolve_scale_period(self.cfg(task="pos", model="basic")) == 1
        assert resolve_scale_period(self.cfg(task="pos", model="seq2seq")) == 100
        assert resolve_scale_period(self.cfg(task="pos", model="seq2seq-attn")) == 100
        assert resolve_scale_period(self.cfg(task="dp", scale_period=0)) == 100


class TestModelConfigFrom:
    def test_dp_widens_per_step_models_only(self):
        dp = dataclasses.replace(apply_preset("dp"), model="dbrnn")
        assert model_config_from(dp, 10, 12).targets_per_step == 2
        dp_seq = dataclasses.replace(apply_preset("dp"), model="seq2seq")
        assert model_config_from(dp_seq, 10, 12).targets_per_step == 1
        toy = dataclasses.replace(apply_preset("toy"), model="basic")
        assert model_config_from(toy, 6, 6).targets_per_step == 1

    def test_maps_sizes_and_mode(self):
        cfg = dataclasses.replace(
            apply_preset("lm"), input_mode="input-only", cell="elstm"
        )
        mc = model_config_from(cfg, 30, 30)
        assert mc.source_vocab == 30
        assert mc.input_mode is InputMode.INPUT_ONLY
        assert mc.scale_period == 3
        assert mc.embedding_dim == 5 and mc.hidden_dim == 5

"""Tests for configuration loading, overrides and validation."""

import math

import pytest

from morn.config import ConfigError, RunConfig, apply_overrides, load_config


class TestDefaults:
    def test_defaults_validate(self):
        load_config()

    def test_published_controller_values(self):
        cfg = load_config()
        assert cfg.thresholds.abort == 0.30
        assert cfg.thresholds.switch == 0.20
        assert cfg.thresholds.commit_distance == 3.0
        assert cfg.thresholds.grace == 20
        assert cfg.signal.window == 5
        assert cfg.signal.ema_alpha is None
        assert cfg.weights.pot_v == 0.4
        assert cfg.weights.gate_gain == 0.5
        assert cfg.weights.acc_stab == 0.4
        assert cfg.weights.prox_scale == 5.0
        assert cfg.bench.budget_k2 == 500
        assert cfg.bench.budget_k3 == 650
        assert cfg.bench.count_k2 == 300
        assert cfg.bench.count_k3 == 200

    def test_commit_threshold_clears_calibration_floor(self):
        cfg = load_config()
        w = cfg.weights
        floor = (w.acc_e * cfg.perception.base_noise_mean
                 + w.acc_stab * 1.0
                 + w.acc_prox * math.exp(-cfg.thresholds.commit_distance / w.prox_scale))
        assert cfg.thresholds.commit > floor


class TestOverrides:
    def test_dotted_key_override(self):
        cfg = load_config(overrides={"thresholds.commit": "0.65",
                                     "bench.count_k2": "10",
                                     "signal.ema_alpha": "0.9"})
        assert cfg.thresholds.commit == 0.65
        assert cfg.bench.count_k2 == 10
        assert cfg.signal.ema_alpha == 0.9

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"nothing.commit": "0.5"})

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"thresholds.banana": "1"})

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"thresholds.grace": "soon"})

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# controller\n"
            "thresholds.commit = 0.62\n"
            "bench.master_seed = 99  # inline comment\n"
        )
        cfg = load_config(path)
        assert cfg.thresholds.commit == 0.62
        assert cfg.bench.master_seed == 99

    def test_malformed_file_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("thresholds.commit 0.62\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_cli_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bench.master_seed = 1\n")
        cfg = load_config(path, overrides={"bench.master_seed": "2"})
        assert cfg.bench.master_seed == 2


class TestValidation:
    def test_commit_below_floor_rejected(self):
        # a flat fully-stable baseline must not clear the commit threshold
        with pytest.raises(ConfigError):
            load_config(overrides={"thresholds.commit": "0.55"})

    def test_bad_weight_sum_rejected(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"weights.acc_e": "0.9"})

    def test_bad_fraction_rejected(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"bench.infeasible_fraction": "1.5"})

    def test_apply_overrides_returns_same_object(self):
        cfg = RunConfig()
        assert apply_overrides(cfg, {"thresholds.grace": "10"}) is cfg
        assert cfg.thresholds.grace == 10

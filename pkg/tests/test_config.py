"""Tests for configuration loading and validation."""

import os
from unittest.mock import patch

import pytest
import yaml

from src.config import SCHEMES, Config, GmfConfig, ModelConfig, PartitionConfig
from src.constants import DEFAULT_SEED, GMF_TOL
from src.exceptions import ConfigError

ENV_KEYS = ("GMF_SEED", "GMF_TRIALS", "GMF_WORKERS", "GMF_OUT_DIR", "GMF_LOG_LEVEL")


@pytest.fixture(autouse=True)
def clean_env():
    """Keep GMF_* variables from the calling shell out of the tests."""
    saved = {k: os.environ.pop(k) for k in ENV_KEYS if k in os.environ}
    yield
    os.environ.update(saved)


class TestDefaults:
    """Tests for the built-in configuration."""

    def test_default_values(self):
        """Defaults should describe the desk-scale inference panel."""
        cfg = Config.default()
        assert cfg.model.n == 24
        assert cfg.model.p == [0.3]
        assert cfg.model.coupling == ["mixed"]
        assert cfg.experiment.seed == DEFAULT_SEED
        assert cfg.experiment.k == [3, 4, 6, 8]
        assert cfg.gmf.tol == GMF_TOL
        assert cfg.partition.schemes == list(SCHEMES)
        assert cfg.partition.benchmark_schemes == ["minc_unit", "maxc_unit"]
        assert cfg.output.out_dir == "results"

    def test_defaults_divisible(self):
        Config.default().check_divisibility()


class TestModelConfig:
    """Tests for model ranges."""

    def test_scalar_coerced_to_list(self):
        """A single value should become a one-element grid."""
        cfg = ModelConfig(p=0.5, w_coup=2.0)
        assert cfg.p == [0.5]
        assert cfg.w_coup == [2.0]

    def test_probability_out_of_range(self):
        with pytest.raises(ValueError):
            ModelConfig(p=[0.3, 1.2])

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            ModelConfig(w_obs=-0.1)

    def test_unknown_coupling(self):
        with pytest.raises(ValueError):
            ModelConfig(coupling="ferro")

    def test_coupling_list(self):
        """Several coupling types should form separate panels."""
        cfg = ModelConfig(coupling=["attractive", "repulsive"])
        assert cfg.coupling == ["attractive", "repulsive"]
        assert ModelConfig(coupling="repulsive").coupling == ["repulsive"]

    def test_empty_coupling_list(self):
        with pytest.raises(ValueError):
            ModelConfig(coupling=[])

    def test_unknown_coupling_in_list(self):
        with pytest.raises(ValueError):
            ModelConfig(coupling=["mixed", "ferro"])


class TestPartitionConfig:
    """Tests for partition scheme selection."""

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            PartitionConfig(schemes=["minc_unit", "spectral"])

    def test_random_not_benchmarkable(self):
        """The random scheme has no relaxation bound."""
        with pytest.raises(ValueError):
            PartitionConfig(benchmark_schemes=["random"])

    def test_unknown_rounding_rejected(self):
        with pytest.raises(ValueError):
            PartitionConfig(roundings=["greedy"])


class TestGmfConfig:
    """Tests for inference settings."""

    def test_damping_below_one(self):
        with pytest.raises(ValueError):
            GmfConfig(damping=1.0)

    def test_positive_tolerance(self):
        with pytest.raises(ValueError):
            GmfConfig(tol=0.0)


class TestConfigLoad:
    """Tests for Config.load."""

    def test_load_missing_file_raises(self, tmp_path):
        """Should raise ConfigError for a missing file."""
        with pytest.raises(ConfigError, match="not found"):
            Config.load(str(tmp_path / "missing.yaml"))

    def test_load_invalid_yaml_raises(self, tmp_path):
        """Should raise ConfigError for unparsable YAML."""
        path = tmp_path / "bad.yaml"
        path.write_text("model: [unclosed\n")
        with pytest.raises(ConfigError, match="parse"):
            Config.load(str(path))

    def test_load_non_mapping_raises(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            Config.load(str(path))

    def test_load_invalid_values_raises(self, tmp_path):
        path = tmp_path / "bad_values.yaml"
        path.write_text(yaml.safe_dump({"experiment": {"trials": 0}}))
        with pytest.raises(ConfigError, match="Invalid configuration"):
            Config.load(str(path))

    def test_load_valid_config(self, tmp_path):
        """Should read every section from YAML."""
        path = tmp_path / "config.yaml"
        path.write_text(
            yaml.safe_dump(
                {
                    "model": {"n": 12, "p": [0.3, 0.5], "w_coup": [0.5, 2.0], "coupling": "attractive"},
                    "gmf": {"tol": 1e-6, "damping": 0.2},
                    "experiment": {"seed": 7, "trials": 3, "k": [2, 3]},
                    "output": {"out_dir": "out", "plots": False},
                }
            )
        )
        cfg = Config.load(str(path))
        assert cfg.model.n == 12
        assert cfg.model.p == [0.3, 0.5]
        assert cfg.model.coupling == ["attractive"]
        assert cfg.gmf.damping == 0.2
        assert cfg.experiment.k == [2, 3]
        assert cfg.output.plots is False

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert Config.load(str(path)).model.n == 24

    def test_env_var_overrides_config_file(self, tmp_path):
        """Environment variables should win over the file."""
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump({"experiment": {"seed": 1, "trials": 5}}))
        env = {"GMF_SEED": "99", "GMF_TRIALS": "2", "GMF_OUT_DIR": "/tmp/gmf", "GMF_LOG_LEVEL": "DEBUG"}
        with patch.dict(os.environ, env):
            cfg = Config.load(str(path))
        assert cfg.experiment.seed == 99
        assert cfg.experiment.trials == 2
        assert cfg.output.out_dir == "/tmp/gmf"
        assert cfg.log_level == "DEBUG"

    def test_invalid_env_value_raises(self):
        with patch.dict(os.environ, {"GMF_WORKERS": "many"}):
            with pytest.raises(ConfigError):
                Config.default()


class TestOverrides:
    """Tests for with_overrides and divisibility checks."""

    def test_overrides_skip_none(self):
        """None values should leave the setting untouched."""
        cfg = Config.default().with_overrides(model={"n": 12, "p": None}, experiment={"seed": 3})
        assert cfg.model.n == 12
        assert cfg.model.p == [0.3]
        assert cfg.experiment.seed == 3

    def test_overrides_scalar_section(self):
        assert Config.default().with_overrides(log_level="WARNING").log_level == "WARNING"

    def test_overrides_validated(self):
        with pytest.raises(ConfigError):
            Config.default().with_overrides(gmf={"damping": 2.0})

    def test_original_unchanged(self):
        cfg = Config.default()
        cfg.with_overrides(model={"n": 6})
        assert cfg.model.n == 24

    def test_divisibility_failure(self):
        """k values that do not divide n should be reported together."""
        cfg = Config.default().with_overrides(model={"n": 10}, experiment={"k": [2, 3, 4]})
        with pytest.raises(ConfigError) as exc:
            cfg.check_divisibility()
        assert exc.value.context["k"] == [3, 4]

    def test_yaml_roundtrip_preserves_values(self, tmp_path):
        cfg = Config.default().with_overrides(model={"n": 12}, experiment={"k": [2, 6]})
        path = tmp_path / "resolved.yaml"
        path.write_text(cfg.to_yaml())
        assert Config.load(str(path)) == cfg

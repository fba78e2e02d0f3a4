import numpy as np
import pytest

from kernrecon.config import load_config
from kernrecon.errors import ConfigError


def write(tmp_path, text):
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_typed_access(self, tmp_path):
        cfg = load_config(write(tmp_path, """
[data]
count = 12
sigma = 1.5
[attack]
learn_bandwidth = true
centers = 2,2; -2,-2
"""))
        assert cfg.get_int("data", "count") == 12
        assert cfg.get_float("data", "sigma") == 1.5
        assert cfg.get_bool("attack", "learn_bandwidth") is True
        np.testing.assert_array_equal(cfg.get_vectors("attack", "centers"),
                                      [[2.0, 2.0], [-2.0, -2.0]])

    def test_defaults_pass_through(self, tmp_path):
        cfg = load_config(write(tmp_path, "[data]\ncount = 3\n"))
        assert cfg.get_int("data", "dim", 7) == 7
        assert cfg.get("model", "kind") is None

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="section"):
            load_config(write(tmp_path, "[mystery]\nx = 1\n"))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(write(tmp_path, "[data]\nbogus = 1\n"))

    def test_bad_choice_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "[model]\nkind = tree\n"))

    def test_bad_type_reported(self, tmp_path):
        cfg = load_config(write(tmp_path, "[data]\ncount = many\n"))
        with pytest.raises(ConfigError, match="count"):
            cfg.get_int("data", "count")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.ini")

    def test_echo_is_flat_and_sorted(self, tmp_path):
        cfg = load_config(write(tmp_path, """
[model]
kind = krr
gamma = 0.15
"""))
        echo = cfg.echo()
        assert echo == {"model.gamma": "0.15", "model.kind": "krr"}
        assert list(echo) == sorted(echo)

    def test_int_list(self, tmp_path):
        cfg = load_config(write(tmp_path, "[attack]\nsnapshots = 0, 200, 20000\n"))
        assert cfg.get_int_list("attack", "snapshots") == [0, 200, 20000]

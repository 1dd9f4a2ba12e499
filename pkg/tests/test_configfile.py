"""Config parsing, validation and overrides."""
import pytest

from loclim.configfile import load_config, merge_overrides, parse_bool, parse_float
from loclim.errors import ConfigError


def write_ini(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadConfig:
    def test_round_trip(self, tmp_path):
        p = write_ini(
            tmp_path,
            "[process]\nkind = fbm\nhurst = 1/3\n\n[experiment]\neps0 = 2^-4\ncount = 5\n",
        )
        cfg = load_config(p)
        assert cfg["process"]["hurst"] == "1/3"
        assert cfg["experiment"]["count"] == "5"

    def test_unknown_key_names_it(self, tmp_path):
        p = write_ini(tmp_path, "[process]\nkind = fbm\nhorst = 0.3\n")
        with pytest.raises(ConfigError, match="horst"):
            load_config(p)

    def test_unknown_section(self, tmp_path):
        p = write_ini(tmp_path, "[nonsense]\nfoo = 1\n")
        with pytest.raises(ConfigError, match="nonsense"):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.ini")

    def test_keys_case_sensitive(self, tmp_path):
        p = write_ini(tmp_path, "[estimator]\nT = 2.0\n")
        assert load_config(p)["estimator"]["T"] == "2.0"


class TestOverrides:
    def test_override_wins(self, tmp_path):
        p = write_ini(tmp_path, "[experiment]\neps0 = 0.5\ncount = 3\n")
        cfg = merge_overrides(load_config(p), "experiment", eps0="0.25")
        assert cfg["experiment"]["eps0"] == "0.25"
        assert cfg["experiment"]["count"] == "3"

    def test_none_skipped(self):
        cfg = merge_overrides({}, "experiment", eps0=None, count=4)
        assert cfg["experiment"] == {"count": "4"}

    def test_unknown_override_key(self):
        with pytest.raises(ConfigError):
            merge_overrides({}, "experiment", bogus=1)


class TestParsers:
    def test_plain_float(self):
        assert parse_float("0.25", "x") == 0.25

    def test_fraction(self):
        assert parse_float("1/5", "x") == 0.2

    def test_power(self):
        assert parse_float("2^-9", "x") == 2.0**-9
        assert parse_float("2^10", "x") == 1024.0

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="eps0"):
            parse_float("abc", "eps0")

    def test_bool(self):
        assert parse_bool("true", "flag") is True
        assert parse_bool("0", "flag") is False
        with pytest.raises(ConfigError):
            parse_bool("maybe", "flag")

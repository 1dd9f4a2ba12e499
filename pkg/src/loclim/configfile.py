"""Key-value run configuration with [section] headers, plus flag overrides.

Files are standard INI (UTF-8).  Unknown sections or keys are rejected
with a message naming them, so typos fail fast instead of silently using
defaults.  Values stay strings here; consumers parse numbers as needed
(Hurst values like "1/5" are kept verbatim for exact-rational handling).
"""
from __future__ import annotations

import configparser
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError

__all__ = ["SCHEMA", "load_config", "merge_overrides", "parse_float", "parse_bool"]

SCHEMA = {
    "process": {"kind", "hurst", "sigma", "dim", "bifbm_h", "bifbm_k"},
    "estimator": {"x", "k", "T", "n_t", "rule"},
    "experiment": {
        "eps0",
        "ratio",
        "count",
        "eps_ref",
        "replicates",
        "order_n",
        "f",
        "master_seed",
        "workers",
        "label",
        "tightness_gaps",
    },
    "output": {"records", "tables_dir", "figures_dir"},
}


def load_config(path) -> dict:
    """Parse an INI file into {section: {key: str}} and validate keys."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive ("T" stays "T")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err
    out: dict = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(parser[section]) - SCHEMA[section]
        if unknown:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown))}"
            )
        out[section] = dict(parser[section])
    return out


def merge_overrides(config: dict, section: str, **overrides) -> dict:
    """Overlay non-None override values onto one section of the config."""
    merged = {sec: dict(vals) for sec, vals in config.items()}
    bucket = merged.setdefault(section, {})
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} for section [{section}]")
        bucket[key] = str(value)
    return merged


def parse_float(text: str, key: str) -> float:
    """Float parser that also accepts fractions ("1/5") and powers ("2^-9")."""
    text = text.strip()
    try:
        if "/" in text:
            return float(Fraction(text))
        if "^" in text:
            base, exp = text.split("^", 1)
            return float(base) ** float(Fraction(exp))
        return float(text)
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"cannot parse {key} = {text!r} as a number") from err


def parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse {key} = {text!r} as a boolean")

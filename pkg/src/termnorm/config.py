"""Flat key=value configuration with defaults, file, and flag layers.

Precedence: built-in defaults < config file < command-line flags. The
config file is plain text, one "key = value" per line, with # comments.
When no --config flag is given the TERMNORM_CONFIG environment variable
may supply the file path; no other behavior comes from the environment.

List-valued keys take comma-separated values. The noise styles of the
synthetic benchmark are paired up from typo_rates and paraphrase_rates,
which must have equal length.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

from .errors import ConfigError
from .synthetic import NoiseStyle, SynthConfig
from .training import MODEL_KINDS, STRATEGIES

ENV_CONFIG_PATH = "TERMNORM_CONFIG"

DEFAULTS = {
    "seed": 0,
    # synthetic benchmark
    "n_pt": 200,
    "children_min": 2,
    "children_max": 6,
    "n_hlt": 20,
    "n_samples": 2000,
    "zipf_exponent": 1.1,
    "typo_rates": (0.05, 0.25),
    "paraphrase_rates": (0.35, 0.05),
    # splitting
    "train_ratio": 0.6,
    # training
    "model_kind": "classifier",
    "strategies": ("finetune", "pretrain_finetune"),
    "learning_rate": None,      # None = per-model-kind default
    "batch_size": 32,
    "n_features": 65536,
    "ngram_min": 2,
    "ngram_max": 4,
    "embed_dim": 128,
    "temperature": 0.07,
    "epoch_scale": 1.0,
}

_INT_KEYS = {"seed", "n_pt", "children_min", "children_max", "n_hlt",
             "n_samples", "batch_size", "n_features", "ngram_min",
             "ngram_max", "embed_dim"}
_FLOAT_KEYS = {"zipf_exponent", "train_ratio", "temperature",
               "epoch_scale"}
_AUTO_FLOAT_KEYS = {"learning_rate"}
_FLOAT_LIST_KEYS = {"typo_rates", "paraphrase_rates"}
_STR_LIST_KEYS = {"strategies"}
_STR_KEYS = {"model_kind"}


def coerce(key: str, raw: str):
    """Parse one raw string value to its typed form for a known key."""
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _AUTO_FLOAT_KEYS:
            return None if raw == "auto" else float(raw)
        if key in _FLOAT_LIST_KEYS:
            return tuple(float(p) for p in raw.split(",") if p.strip())
        if key in _STR_LIST_KEYS:
            return tuple(p.strip() for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key "
                          f"{key!r}") from None
    if key in _STR_KEYS:
        return raw
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_file(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(raw.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {line!r}")
        key, value = text.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown config key "
                              f"{key!r}")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = coerce(key, value)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults merged with an optional file and typed flag overrides."""
    cfg = dict(DEFAULTS)
    if path is None:
        path = os.environ.get(ENV_CONFIG_PATH) or None
    if path:
        cfg.update(parse_config_file(path))
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = value
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> dict:
    if len(cfg["typo_rates"]) != len(cfg["paraphrase_rates"]):
        raise ConfigError(
            f"typo_rates has {len(cfg['typo_rates'])} entries but "
            f"paraphrase_rates has {len(cfg['paraphrase_rates'])}; the "
            f"lists pair up one noise style each")
    if cfg["model_kind"] not in MODEL_KINDS:
        raise ConfigError(f"model_kind must be one of {MODEL_KINDS}, "
                          f"got {cfg['model_kind']!r}")
    for s in cfg["strategies"]:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}; valid: "
                              f"{STRATEGIES}")
    if not cfg["strategies"]:
        raise ConfigError("strategies must not be empty")
    if not (0.0 < cfg["train_ratio"] < 1.0):
        raise ConfigError(f"train_ratio must be strictly between 0 and 1, "
                          f"got {cfg['train_ratio']}")
    return cfg


def synth_config(cfg: dict) -> SynthConfig:
    styles = tuple(NoiseStyle(typo_rate=t, paraphrase_rate=p)
                   for t, p in zip(cfg["typo_rates"],
                                   cfg["paraphrase_rates"]))
    return SynthConfig(
        n_pt=cfg["n_pt"], children_min=cfg["children_min"],
        children_max=cfg["children_max"], n_hlt=cfg["n_hlt"],
        n_samples=cfg["n_samples"], zipf_exponent=cfg["zipf_exponent"],
        styles=styles, seed=cfg["seed"]).validate()


def format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_hash(cfg: dict) -> str:
    """sha256 over the canonical key=value rendering."""
    canonical = "".join(f"{k}={format_value(cfg[k])}\n"
                        for k in sorted(cfg))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_as_strings(cfg: dict) -> dict:
    return {k: format_value(cfg[k]) for k in sorted(cfg)}

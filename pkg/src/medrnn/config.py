"""Flat dotted-key run configuration (``model.h``, ``train.learning_rate``...)."""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path

from .baselines import DEFAULT_LAMBDA
from .families import FAMILIES
from .model import ModelConfig
from .train import TrainConfig

PRESETS = ("desk", "paper-scale")

# hidden sizes of the paper-scale preset: single-station RNNs vs joint RNN
PAPER_H_STATION = 130
PAPER_H_JOINT = 300

DEFAULTS: dict = {
    "family": "attention",
    "preset": "desk",
    "model.T_enc": 48,
    "model.T_dec": 24,
    "model.h": 32,
    "model.p_att": 16,
    "model.mean_scale": True,
    "model.share_attention": False,
    "model.teacher_forcing": True,
    **{f"train.{f.name}": f.default for f in fields(TrainConfig)},
    "data.stride": None,
    "data.fractions": [0.7, 0.1, 0.2],
    "data.boundaries": None,
    "ridge.lambda": DEFAULT_LAMBDA,
}

_INT_KEYS = {"model.T_enc", "model.T_dec", "model.h", "model.p_att", "train.batch_size",
             "train.max_epochs", "train.patience", "train.seed"}
_BOOL_KEYS = {"model.mean_scale", "model.share_attention", "model.teacher_forcing"}
_FLOAT_KEYS = {"train.learning_rate", "train.momentum", "train.grad_clip_norm",
               "train.encoder_dropout_prob", "ridge.lambda"}


class ConfigError(ValueError):
    pass


def _check(key, value) -> str | None:
    if key in _INT_KEYS and (not isinstance(value, int) or isinstance(value, bool)):
        return f"{key}: expected integer, got {value!r}"
    if key in _BOOL_KEYS and not isinstance(value, bool):
        return f"{key}: expected boolean, got {value!r}"
    if key in _FLOAT_KEYS and (not isinstance(value, (int, float)) or isinstance(value, bool)):
        return f"{key}: expected number, got {value!r}"
    if key == "family" and value not in FAMILIES:
        return f"family: expected one of {list(FAMILIES)}, got {value!r}"
    if key == "preset" and value not in PRESETS:
        return f"preset: expected one of {list(PRESETS)}, got {value!r}"
    if key == "data.stride" and value is not None and (not isinstance(value, int) or value < 1):
        return f"data.stride: expected null or integer >= 1, got {value!r}"
    if key == "data.fractions" and (not isinstance(value, list) or len(value) != 3):
        return f"data.fractions: expected a list of three numbers, got {value!r}"
    if key == "data.boundaries" and value is not None and (not isinstance(value, list) or len(value) != 2):
        return f"data.boundaries: expected null or [valid_start, test_start], got {value!r}"
    return None


def resolve(user: dict | None = None) -> dict:
    """Merge ``user`` over the defaults; every offending key is reported at once."""
    user = dict(user or {})
    problems = [f"unknown key: {k}" for k in sorted(user) if k not in DEFAULTS]
    problems += [p for k in sorted(user) if k in DEFAULTS for p in [_check(k, user[k])] if p]
    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
    cfg = dict(DEFAULTS, **user)
    if cfg["preset"] == "paper-scale" and "model.h" not in user:
        cfg["model.h"] = PAPER_H_JOINT if cfg["family"] == "rnn-joint" else PAPER_H_STATION
    return cfg


def load(path=None, **overrides) -> dict:
    user = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    user.update({k: v for k, v in overrides.items() if v is not None})
    return resolve(user)


def model_config(run: dict, E: int, F: int) -> ModelConfig:
    """Base config for a station network with ``E`` stations of ``F`` features each."""
    return ModelConfig(E=E, D=E, T_enc=run["model.T_enc"], T_dec=run["model.T_dec"],
                       F_enc=F, F_dec=F, h=run["model.h"], p_att=run["model.p_att"],
                       mean_scale=run["model.mean_scale"],
                       share_attention=run["model.share_attention"],
                       teacher_forcing=run["model.teacher_forcing"])


def train_config(run: dict) -> TrainConfig:
    return TrainConfig(**{f.name: run[f"train.{f.name}"] for f in fields(TrainConfig)})

"""Key=value config files and the default settings they override."""
from __future__ import annotations

from .errors import ConfigError
from .model import SdrcnnConfig
from .train import TrainConfig
from .wald import SensorModel

DEFAULTS = {
    # model
    "bands": 8,
    "width": 52,
    "expansion": 5,
    "n_residual_blocks": 3,
    "kernel": 3,
    "upsample_factor": 4,
    # training
    "lr": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "adam_eps": 1e-8,
    "iterations": 2000,
    "batch_size": 4,
    "val_every": 100,
    "seed": 0,
    "spectral_mapping": True,
    "bn": False,
    "extra_relu": False,
    "budget": None,
    # sensor simulation
    "ms_gain": 0.30,
    "pan_gain": 0.15,
    "ratio": 4,
    "blur_size": 41,
    "patch": 64,
    "stride": 64,
    "scene_size": 128,
    "scenes": 4,
    # classical fusion
    "sfim_kernel": 7,
    "sfim_clamp_lo": 0.2,
    "sfim_clamp_hi": 5.0,
    "gs_eps": 1e-6,
    # quality indices
    "q_block": 32,
    "q_shift": 32,
    # png export
    "png_vmin": 0.0,
    "png_vmax": 1.0,
}

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_value(key: str, text: str):
    default = DEFAULTS[key]
    text = text.strip()
    if default is None or isinstance(default, bool):
        low = text.lower()
        if low in ("none", ""):
            if default is None:
                return None
            raise ConfigError(f"{key} expects a boolean, got {text!r}")
        if isinstance(default, bool):
            if low not in _BOOL:
                raise ConfigError(f"{key} expects a boolean, got {text!r}")
            return _BOOL[low]
        return int(text)  # budget: None default, integer override
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key} expects an integer, got {text!r}") from exc
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key} expects a number, got {text!r}") from exc
    return text


def load_config(path=None, overrides=None) -> dict:
    """Defaults, optionally updated from a key=value file and an override dict.

    Lines starting with # and blank lines are skipped.  Unknown keys are
    rejected so typos fail loudly.
    """
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for lineno, line in enumerate(lines, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = _parse_value(key, value)
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    return cfg


def model_config(cfg: dict) -> SdrcnnConfig:
    return SdrcnnConfig(
        bands=cfg["bands"], width=cfg["width"], expansion=cfg["expansion"],
        n_residual_blocks=cfg["n_residual_blocks"], kernel=cfg["kernel"],
        upsample_factor=cfg["upsample_factor"],
    ).validate()


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        model=model_config(cfg), iterations=cfg["iterations"],
        batch_size=cfg["batch_size"], lr=cfg["lr"], beta1=cfg["beta1"],
        beta2=cfg["beta2"], adam_eps=cfg["adam_eps"], seed=cfg["seed"],
        spectral_mapping=cfg["spectral_mapping"], bn=cfg["bn"],
        extra_relu=cfg["extra_relu"], budget=cfg["budget"],
        val_every=cfg["val_every"],
    ).validate()


def sensor_model(cfg: dict) -> SensorModel:
    return SensorModel(
        bands=cfg["bands"], ms_gain=cfg["ms_gain"], pan_gain=cfg["pan_gain"],
        ratio=cfg["ratio"],
    ).validate()

"""Flat ``key = value`` run configuration with command-line overrides."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from ..data.augment import SCALES, AugmentConfig
from ..errors import ConfigError
from ..model.network import PRESETS, TerraceConfig

# full-scale epoch budgets for the aerial benchmarks; recorded for reference, never used by default
FULL_SCALE_EPOCHS = {"vaihingen": 155, "potsdam": 100, "loveda": 120}
SWEEP_AXES = ("activation", "transpose_kernel", "lateral_kernel", "decoder")


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    text = str(text).strip()
    return tuple(int(v) for v in text.replace("x", ",").split(",") if v.strip()) if text else ()


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _kernel(text):
    v = str(text).strip().lower()
    if v in ("none", "-", ""):
        return None
    if v == "upsample":
        return "upsample"
    return int(v)


@dataclass
class RunConfig:
    preset: str = "desk"
    stage_channels: tuple = ()
    num_classes: int = 4
    transpose_kernel: object = 3
    lateral_kernel: object = 3
    activation: str = "relu6"
    decoder: str = "terrace"
    seed: int = 0
    epochs: int = 20
    max_steps: int = 0
    batch_size: int = 8
    peak_lr: float = 6e-4
    weight_decay: float = 1e-3
    crop: int = 0
    augment: bool = True
    scales: tuple = SCALES
    train_dir: str = ""
    val_dir: str = ""
    synthetic_train: int = 200
    synthetic_val: int = 50
    synthetic_size: int = 64
    data_seed: int = 0
    out_dir: str = "runs/default"
    threads: int = 1
    checkpoint: str = ""
    eval_dir: str = ""
    eval_split: str = "val"
    excluded_classes: tuple = ()
    images_dir: str = ""
    save_logits: bool = False
    bench_shape: tuple = (1, 3, 64, 64)
    bench_iters: int = 10
    sweep_axis: str = "activation"
    gradcheck_h: float = 1e-4
    gradcheck_tol: float = 1e-3

    _parsers = {
        "stage_channels": _ints, "excluded_classes": _ints, "bench_shape": _ints,
        "scales": lambda t: tuple(float(v) for v in str(t).split(",")) if not isinstance(t, tuple) else t,
        "transpose_kernel": _kernel, "lateral_kernel": _kernel,
    }

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if not self.stage_channels:
            self.stage_channels = PRESETS[self.preset]
        if not self.crop:
            self.crop = 512 if self.preset == "paper" else 64
        if self.batch_size < 1 or self.epochs < 0 or self.max_steps < 0:
            raise ConfigError("batch_size must be >= 1; epochs and max_steps must be >= 0")
        if self.peak_lr <= 0 or self.weight_decay < 0:
            raise ConfigError("peak_lr must be > 0 and weight_decay >= 0")
        if self.eval_split not in ("train", "val"):
            raise ConfigError(f"eval_split must be 'train' or 'val', got {self.eval_split!r}")
        if self.sweep_axis not in SWEEP_AXES + ("all",):
            raise ConfigError(f"sweep_axis must be one of {SWEEP_AXES + ('all',)}, got {self.sweep_axis!r}")
        if len(self.bench_shape) != 4:
            raise ConfigError(f"bench_shape needs 4 dims (n,c,h,w), got {self.bench_shape}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for c in self.excluded_classes:
            if not 0 <= c < self.num_classes:
                raise ConfigError(f"excluded class {c} outside [0, {self.num_classes})")
        self.model_config()
        self.augment_config()

    def model_config(self) -> TerraceConfig:
        return TerraceConfig(
            stage_channels=self.stage_channels, num_classes=self.num_classes,
            transpose_kernel=self.transpose_kernel, lateral_kernel=self.lateral_kernel,
            activation=self.activation, decoder=self.decoder,
        )

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(scales=self.scales, crop=self.crop)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif v is None:
                v = "none"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


KEYS = {f.name for f in fields(RunConfig)}


def _coerce(key: str, value):
    f = {f.name: f for f in fields(RunConfig)}[key]
    parser = RunConfig._parsers.get(key)
    try:
        if parser is not None:
            return parser(value)
        if f.type in ("int", int):
            return int(value)
        if f.type in ("float", float):
            return float(value)
        if f.type in ("bool", bool):
            return _bool(value)
        return str(value).strip()
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = normalize_key(key)
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def parse_overrides(tokens: list[str]) -> dict:
    """``--key value`` / ``--key=value`` pairs; later occurrences win."""
    values, i = {}, 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, value = tok.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"missing value for {tok}")
            key, value = tok, tokens[i + 1]
            i += 2
        key = normalize_key(key)
        if key not in KEYS:
            raise ConfigError(f"unknown option --{key.replace('_', '-')}")
        values[key] = _coerce(key, value)
    return values


def load(config_path: str | None, overrides: list[str] | dict | None = None) -> RunConfig:
    values = {}
    if config_path:
        try:
            with open(config_path) as f:
                values.update(parse_text(f.read(), config_path))
        except OSError as e:
            raise ConfigError(f"{config_path}: {e.strerror}") from None
    if isinstance(overrides, dict):
        values.update({normalize_key(k): _coerce(normalize_key(k), v) for k, v in overrides.items()})
    elif overrides:
        values.update(parse_overrides(overrides))
    return RunConfig(**values)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path

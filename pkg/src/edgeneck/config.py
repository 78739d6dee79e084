"""Line-oriented run configuration: ``key=value`` with ``#`` comments."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

FA_MODES = ("full", "low3", "high3")
DTYPES = {"f32": np.float32, "f64": np.float64}
KEYS = ("input", "seed", "channels", "pyramid_width", "fa_mode",
        "reduction_ratio", "dtype", "dump_dir")


@dataclass(frozen=True)
class RunConfig:
    input: str = "noise"
    seed: int = 0
    channels: tuple = (16, 32, 64, 128, 256)
    pyramid_width: int = 256
    fa_mode: str = "full"
    reduction_ratio: int = 16
    dtype: str = "f32"
    dump_dir: str = ""

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    def override(self, **updates):
        updates = {k: v for k, v in updates.items() if v is not None}
        return replace(self, **updates) if updates else self


def _parse_int(key, raw, minimum=None):
    try:
        value = int(raw, 0)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _parse_input(raw):
    if not raw:
        raise ConfigError("input must be 'noise', 'noise:HxW', or an image path")
    if raw.startswith("noise:"):
        noise_size(raw)  # validate eagerly so errors name the config key
    return raw


def noise_size(spec):
    """Spatial dims of a noise input spec; (256, 256) for plain 'noise'."""
    if spec == "noise":
        return 256, 256
    body = spec[len("noise:"):]
    parts = body.lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"input noise size must look like HxW, got {body!r}")
    h = _parse_int("input height", parts[0], minimum=1)
    w = _parse_int("input width", parts[1], minimum=1)
    return h, w


def _parse_value(key, raw):
    if key == "input":
        return _parse_input(raw)
    if key == "seed":
        return _parse_int(key, raw)
    if key == "channels":
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 5:
            raise ConfigError(f"channels must list 5 counts, got {raw!r}")
        return tuple(_parse_int("channels", p, minimum=1) for p in parts)
    if key == "pyramid_width":
        return _parse_int(key, raw, minimum=1)
    if key == "fa_mode":
        if raw not in FA_MODES:
            raise ConfigError(f"fa_mode must be one of {FA_MODES}, got {raw!r}")
        return raw
    if key == "reduction_ratio":
        return _parse_int(key, raw, minimum=1)
    if key == "dtype":
        if raw not in DTYPES:
            raise ConfigError(f"dtype must be 'f32' or 'f64', got {raw!r}")
        return raw
    if key == "dump_dir":
        return raw
    raise ConfigError(f"unknown config key {key!r}")


def parse_config(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))

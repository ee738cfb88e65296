"""Experiment configuration files and overrides.

Files are flat ``section.key = value`` lines (``#`` starts a comment) with
sections ``model``, ``train`` and ``data``. Precedence, lowest first:
defaults (including the runtime default seed), ``data.preset``, the file,
``--set`` overrides, ``--seed``, dedicated flags.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..models.config import ModelConfig, TrainConfig
from ..utils.presets import preset_settings

log = logging.getLogger("hf.cli")

SECTIONS = ("model", "train", "data")
_DATA_DEPENDENT = {"n", "c"}


@dataclass(frozen=True)
class DataSpec:
    path: str | None = None
    synthetic: bool = False
    synthetic_n: int = 8
    synthetic_t: int = 400
    synthetic_m: int = 2
    synthetic_noise: float = 0.05
    synthetic_disturbance: float = 0.0
    synthetic_lead: int = 0
    split: tuple = (6, 2, 2)
    normalizer: str = "zscore"
    stride: int = 1
    missing: str = "none"
    missing_ratio: float = 0.0
    sensor_fail_prob: float = 0.0
    preset: str | None = None

    def validate(self) -> "DataSpec":
        if not self.synthetic and not self.path:
            raise ConfigError("set data.path or data.synthetic = true")
        if len(self.split) != 3 or any(r <= 0 for r in self.split):
            raise ConfigError(f"data.split needs three positive integers, got {self.split}")
        if self.normalizer not in ("zscore", "minmax"):
            raise ConfigError(f"data.normalizer must be zscore or minmax, got {self.normalizer!r}")
        if self.missing not in ("none", "point", "block"):
            raise ConfigError(f"data.missing must be none, point or block, got {self.missing!r}")
        if not 0 <= self.missing_ratio < 1 or not 0 <= self.sensor_fail_prob < 1:
            raise ConfigError("missing ratio and sensor failure probability must lie in [0, 1)")
        if self.stride < 1:
            raise ConfigError("data.stride must be >= 1")
        if self.synthetic and min(self.synthetic_n, self.synthetic_t, self.synthetic_m) < 1:
            raise ConfigError("synthetic sizes must be >= 1")
        if self.synthetic_disturbance < 0 or self.synthetic_lead < 0:
            raise ConfigError("data.synthetic_disturbance and data.synthetic_lead must be non-negative")
        return self


@dataclass
class RunSpec:
    """One CLI invocation: command, config file, overrides and seed.

    ``seed`` is the explicit ``--seed``; ``default_seed`` sits below the config
    file and ``--set`` and only fills ``train.seed`` when nothing else does.
    """
    command: str
    config_path: str | None = None
    overrides: list = field(default_factory=list)
    seed: int | None = None
    out_dir: str | None = None
    default_seed: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    train: TrainConfig
    data: DataSpec

    def model_config(self, n: int, c: int) -> ModelConfig:
        return ModelConfig(n=n, c=c, **self.model).validate()

    def with_overrides(self, settings: dict) -> "ExperimentConfig":
        """Copy with typed ``section.key`` settings applied (used by sweeps and ablations)."""
        model, train, data = dict(self.model), self.train, self.data
        for key, value in settings.items():
            section, name = _split_key(key)
            typed = _convert(section, name, value)
            if section == "model":
                model[name] = typed
            elif section == "train":
                train = replace(train, **{name: typed})
            else:
                data = replace(data, **{name: typed})
        return ExperimentConfig(model, train.validate(), data.validate())

    def settings(self) -> dict:
        out = {f"model.{k}": v for k, v in self.model.items()}
        out.update({f"train.{k}": v for k, v in self.train.to_dict().items()})
        out.update({f"data.{f.name}": getattr(self.data, f.name) for f in fields(DataSpec)})
        return out

    def to_text(self) -> str:
        return "".join(f"{key} = {_format(value)}\n" for key, value in sorted(self.settings().items()))


# ── parsing ─────────────────────────────────────────────────────────────────

def _format(value) -> str:
    if isinstance(value, tuple):
        return ":".join(str(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _defaults(section: str) -> dict:
    if section == "model":
        return {f.name: f.default for f in fields(ModelConfig) if f.name not in _DATA_DEPENDENT}
    cls = TrainConfig if section == "train" else DataSpec
    return {f.name: f.default for f in fields(cls)}


def _split_key(key: str) -> tuple[str, str]:
    key = key.strip()
    section, _, name = key.partition(".")
    if section not in SECTIONS or not name:
        raise ConfigError(f"unknown config key {key!r} (keys look like model.d, train.lr, data.path)")
    if section == "model" and name in _DATA_DEPENDENT:
        raise ConfigError(f"{key} is taken from the data and cannot be set")
    if name not in _defaults(section):
        raise ConfigError(f"unknown config key {key!r}")
    return section, name


def _to_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(section: str, name: str, value):
    default = _defaults(section)[name]
    if not isinstance(value, str):
        if isinstance(default, tuple):
            return tuple(int(v) for v in value)
        return value
    text = value.strip()
    try:
        if isinstance(default, bool):
            return _to_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(v) for v in text.replace(",", ":").split(":"))
        if default is None:
            return text or None
        return text
    except ValueError as exc:
        raise ConfigError(f"{section}.{name}: cannot convert {value!r} ({exc})") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Raw ``key → value`` strings from ``key = value`` lines."""
    settings = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        settings[key.strip()] = value.strip()
    return settings


def parse_override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects key=value, got {text!r}")
    return key.strip(), value.strip()


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def resolve(spec: RunSpec, flags: dict | None = None) -> ExperimentConfig:
    """Merge defaults, preset, file, overrides and flags into a validated config."""
    raw = {}
    if spec.config_path:
        raw.update(read_config_file(spec.config_path))
    for item in spec.overrides:
        key, value = parse_override(item)
        raw[key] = value
    if spec.seed is not None:
        raw["train.seed"] = spec.seed
    for key, value in (flags or {}).items():
        if value is not None:
            raw[key] = value

    merged = {}
    if spec.default_seed is not None:
        merged["train.seed"] = spec.default_seed
    preset = raw.get("data.preset")
    if preset:
        merged.update(preset_settings(str(preset)))
    merged.update(raw)

    typed = {"model": _defaults("model"), "train": _defaults("train"), "data": _defaults("data")}
    for key, value in merged.items():
        section, name = _split_key(key)
        typed[section][name] = _convert(section, name, value)

    try:
        train = TrainConfig(**typed["train"]).validate()
        data = DataSpec(**typed["data"]).validate()
        ModelConfig(n=1, c=1, **typed["model"]).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    exp = ExperimentConfig(typed["model"], train, data)
    if spec.command:
        log.info("Resolved %s config: %s", spec.command,
                 ", ".join(f"{k}={_format(v)}" for k, v in sorted(exp.settings().items())))
    return exp

"""Architecture and training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError

ABLATIONS = ("full", "no_spatial", "no_temporal", "no_sthgcn", "no_sttn")
OUTPUT_ACTIVATIONS = ("identity", "sigmoid")
LOSSES = ("mae", "gaussian_nll")

# fields that determine parameter shapes; a checkpoint only loads when these agree
ARCHITECTURE_FIELDS = (
    "n", "c", "tau", "upsilon", "d", "m", "hgat_heads", "heads", "hgat_layers",
    "temporal_blocks", "spatial_blocks", "d_ff", "uncertainty", "mask_channel",
)


@dataclass(frozen=True)
class ModelConfig:
    n: int
    c: int = 1
    tau: int = 12
    upsilon: int = 12
    d: int = 18
    m: int = 5
    hgat_heads: int = 2
    heads: int = 2
    gamma: float = 0.05
    epsilon: float = 1e-8
    dropout: float = 0.1
    ablation: str = "full"
    uncertainty: bool = False
    output_activation: str = "identity"
    hgat_activation: str = "sigmoid"
    hgat_layers: int = 1
    temporal_blocks: int = 1
    spatial_blocks: int = 1
    d_ff: int = 0  # 0 means 2*d
    post_norm: bool = False
    initial_connection: bool = True
    straight_through: bool = False
    harden_threshold: float = 0.5
    mask_channel: bool = True

    @property
    def ff_size(self) -> int:
        return self.d_ff or 2 * self.d

    @property
    def head_dim(self) -> int:
        return self.d // self.heads

    @property
    def input_channels(self) -> int:
        return self.c + 1 if self.mask_channel else self.c

    def validate(self) -> "ModelConfig":
        for name in ("n", "c", "tau", "upsilon", "d", "m", "hgat_heads", "heads", "hgat_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1, got {getattr(self, name)}")
        if self.temporal_blocks < 0 or self.spatial_blocks < 0 or self.d_ff < 0:
            raise ConfigError("model block counts and d_ff must be non-negative")
        if self.d % self.heads:
            raise ConfigError(f"model.d={self.d} is not divisible by model.heads={self.heads}")
        if self.gamma <= 0:
            raise ConfigError(f"model.gamma must be > 0, got {self.gamma}")
        if self.epsilon < 0:
            raise ConfigError(f"model.epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"model.dropout must lie in [0, 1), got {self.dropout}")
        if not 0 < self.harden_threshold < 1:
            raise ConfigError(f"model.harden_threshold must lie in (0, 1), got {self.harden_threshold}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r} (expected one of {', '.join(ABLATIONS)})")
        for name in ("output_activation", "hgat_activation"):
            if getattr(self, name) not in OUTPUT_ACTIVATIONS:
                raise ConfigError(f"model.{name} must be identity or sigmoid, got {getattr(self, name)!r}")
        return self

    def architecture(self) -> dict:
        return {k: getattr(self, k) for k in ARCHITECTURE_FIELDS}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model keys: {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 32
    plateau_patience: int = 5
    early_stop_patience: int = 10
    grad_clip: float = 5.0
    loss: str = "mae"
    seed: int = 0
    max_steps: int = 0
    prefetch: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"train.lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("train patience values must be >= 1")
        if self.grad_clip < 0:
            raise ConfigError(f"train.grad_clip must be >= 0, got {self.grad_clip}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r} (expected mae or gaussian_nll)")
        if self.max_steps < 0:
            raise ConfigError("train.max_steps must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.adam_eps <= 0:
            raise ConfigError("invalid Adam constants")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train keys: {', '.join(sorted(unknown))}")
        return cls(**data)

"""Trainable parameter groups.

Each group is a dataclass whose fields are tensors, nested groups or lists of
groups. ``named_parameters`` flattens the tree into dotted names such as
``hgrl.hgat.layers.0.heads.1.w0``; those names are what checkpoints store and
what ablations exclude.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ..core.tensor import Tensor, parameter
from ..errors import CheckpointMismatch


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return parameter(rng.uniform(-bound, bound, size=shape))


def _zeros(shape) -> Tensor:
    return parameter(np.zeros(shape))


def _ones(shape) -> Tensor:
    return parameter(np.ones(shape))


def _walk(key, value):
    if isinstance(value, Tensor):
        yield key, value
    elif isinstance(value, ParamGroup):
        yield from value.named_parameters(prefix=key + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{key}.{i}", item)


class ParamGroup:
    """Mixin giving dataclass parameter groups tree traversal and state I/O."""

    def named_parameters(self, prefix: str = ""):
        for f in fields(self):
            yield from _walk(prefix + f.name, getattr(self, f.name))

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self.named_parameters()}

    def load_state_dict(self, state: dict) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise CheckpointMismatch(f"parameter names differ (missing={missing[:3]}, unexpected={extra[:3]})")
        for name, t in own.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != t.shape:
                raise CheckpointMismatch(f"{name}: checkpoint shape {list(values.shape)} != model shape {list(t.shape)}")
            np.copyto(t.values, values)

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()

    def count(self) -> int:
        return int(sum(t.size for t in self.parameters()))


@dataclass
class ProjectionParams(ParamGroup):
    """Gated linear input projection: channel maps w0/w1, time map w2."""
    w0: Tensor
    w1: Tensor
    w2: Tensor

    @classmethod
    def init(cls, config, rng):
        cin = config.input_channels
        return cls(
            w0=_uniform(rng, (cin, config.d), cin),
            w1=_uniform(rng, (cin, config.d), cin),
            w2=_uniform(rng, (config.tau, config.upsilon), config.tau),
        )


@dataclass
class EmbeddingBank(ParamGroup):
    node_embeddings: Tensor
    edge_embeddings: Tensor

    @classmethod
    def init(cls, config, rng):
        return cls(
            node_embeddings=parameter(_nonzero_rows(rng, config.n, config.d)),
            edge_embeddings=parameter(_nonzero_rows(rng, config.m, config.d)),
        )


def _nonzero_rows(rng, rows, d):
    bound = 1.0 / np.sqrt(d)
    z = rng.uniform(-bound, bound, size=(rows, d))
    while True:
        bad = np.linalg.norm(z, axis=1) < 1e-8
        if not bad.any():
            return z
        z[bad] = rng.uniform(-bound, bound, size=(int(bad.sum()), d))


@dataclass
class HgatHeadParams(ParamGroup):
    w0: Tensor
    w1: Tensor
    w2: Tensor
    w3: Tensor  # 2×d: row 0 scores the node side, row 1 the edge side

    @classmethod
    def init(cls, config, rng):
        d = config.d
        return cls(
            w0=_uniform(rng, (d, d), d),
            w1=_uniform(rng, (d, d), d),
            w2=_uniform(rng, (d, d), d),
            w3=_uniform(rng, (2, d), 2 * d),
        )


@dataclass
class HgatLayerParams(ParamGroup):
    heads: list
    norm_scale: Tensor
    norm_shift: Tensor
    f_s: Tensor
    b_s: Tensor
    f_g: Tensor
    b_g: Tensor

    @classmethod
    def init(cls, config, rng):
        d = config.d
        return cls(
            heads=[HgatHeadParams.init(config, rng) for _ in range(config.hgat_heads)],
            norm_scale=_ones(d),
            norm_shift=_zeros(d),
            f_s=_uniform(rng, (d, d), d),
            b_s=_zeros(d),
            f_g=_uniform(rng, (d, d), d),
            b_g=_zeros(d),
        )


@dataclass
class HgatParams(ParamGroup):
    layers: list

    @classmethod
    def init(cls, config, rng):
        return cls(layers=[HgatLayerParams.init(config, rng) for _ in range(config.hgat_layers)])


@dataclass
class HgrlParams(ParamGroup):
    hgat: HgatParams
    w_u: Tensor
    w_r: Tensor
    w_c: Tensor
    b_u: Tensor
    b_r: Tensor
    b_c: Tensor

    @classmethod
    def init(cls, config, rng):
        d = config.d
        return cls(
            hgat=HgatParams.init(config, rng),
            w_u=_uniform(rng, (2 * d, d), 2 * d),
            w_r=_uniform(rng, (2 * d, d), 2 * d),
            w_c=_uniform(rng, (2 * d, d), 2 * d),
            b_u=_zeros(d),
            b_r=_zeros(d),
            b_c=_zeros(d),
        )


@dataclass
class AttentionParams(ParamGroup):
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bo: Tensor

    @classmethod
    def init(cls, config, rng):
        d = config.d
        return cls(
            wq=_uniform(rng, (d, d), d),
            wk=_uniform(rng, (d, d), d),
            wv=_uniform(rng, (d, d), d),
            wo=_uniform(rng, (d, d), d),
            bo=_zeros(d),
        )


@dataclass
class EncoderBlockParams(ParamGroup):
    attn: AttentionParams
    ln1_scale: Tensor
    ln1_shift: Tensor
    ln2_scale: Tensor
    ln2_shift: Tensor
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor

    @classmethod
    def init(cls, config, rng):
        d, ff = config.d, config.ff_size
        return cls(
            attn=AttentionParams.init(config, rng),
            ln1_scale=_ones(d),
            ln1_shift=_zeros(d),
            ln2_scale=_ones(d),
            ln2_shift=_zeros(d),
            mlp_w1=_uniform(rng, (d, ff), d),
            mlp_b1=_zeros(ff),
            mlp_w2=_uniform(rng, (ff, d), ff),
            mlp_b2=_zeros(d),
        )


@dataclass
class SttnParams(ParamGroup):
    temporal: list = field(default_factory=list)
    spatial: list = field(default_factory=list)

    @classmethod
    def init(cls, config, rng):
        return cls(
            temporal=[EncoderBlockParams.init(config, rng) for _ in range(config.temporal_blocks)],
            spatial=[EncoderBlockParams.init(config, rng) for _ in range(config.spatial_blocks)],
        )


@dataclass
class FusionParams(ParamGroup):
    f_s: Tensor
    b_s: Tensor
    f_g: Tensor
    b_g: Tensor

    @classmethod
    def init(cls, config, rng):
        d = config.d
        return cls(f_s=_uniform(rng, (d, d), d), b_s=_zeros(d),
                   f_g=_uniform(rng, (d, d), d), b_g=_zeros(d))


@dataclass
class ReadoutParams(ParamGroup):
    w_mu: Tensor
    b_mu: Tensor
    w_var: Tensor | None = None
    b_var: Tensor | None = None

    @classmethod
    def init(cls, config, rng):
        d, c = config.d, config.c
        out = cls(w_mu=_uniform(rng, (d, c), d), b_mu=_zeros(c))
        if config.uncertainty:
            out.w_var = _uniform(rng, (d, c), d)
            out.b_var = _zeros(c)
        return out


@dataclass
class ModelParams(ParamGroup):
    projection: ProjectionParams
    structure: EmbeddingBank
    hgrl: HgrlParams
    sttn: SttnParams
    fusion: FusionParams
    readout: ReadoutParams

    @classmethod
    def init(cls, config, rng):
        params = cls(
            projection=ProjectionParams.init(config, rng),
            structure=EmbeddingBank.init(config, rng),
            hgrl=HgrlParams.init(config, rng),
            sttn=SttnParams.init(config, rng),
            fusion=FusionParams.init(config, rng),
            readout=ReadoutParams.init(config, rng),
        )
        for name, t in params.named_parameters():
            t.name = name
        return params

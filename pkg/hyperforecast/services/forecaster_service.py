"""End-to-end forecaster: projection, the two experts, gated fusion, readout, losses."""

from __future__ import annotations

import logging

import numpy as np

from ..core import ops
from ..core.tensor import Tensor, as_tensor, constant
from ..errors import ConfigError, EmptyMask, ShapeMismatch
from ..models.config import ModelConfig
from ..models.forecast import Forecast, ModelOutput
from ..models.params import ModelParams
from ..models.series import Normalizer
from .hgat_service import AttentionTrace, gated_fuse, hgat_forward
from .hgrl_service import hgrl_unroll
from .structure_service import learn_structure
from .sttn_service import sttn_forward

log = logging.getLogger("hf.train")

VARIANCE_FLOOR = 1e-6

# parameter-name prefixes each ablation leaves unused
_EXCLUDED = {
    "full": (),
    "no_spatial": ("structure.", "hgrl.", "sttn.", "fusion."),
    "no_temporal": ("hgrl.w_", "hgrl.b_", "sttn.temporal."),
    "no_sthgcn": ("structure.", "hgrl.", "fusion."),
    "no_sttn": ("sttn.", "fusion."),
}


def init_params(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    config.validate()
    params = ModelParams.init(config, rng)
    log.debug("initialised %d parameters in %d tensors", params.count(), len(params.parameters()))
    return params


def excluded_parameters(ablation: str) -> tuple:
    if ablation not in _EXCLUDED:
        raise ConfigError(f"unknown ablation {ablation!r}")
    return _EXCLUDED[ablation]


def is_excluded(name: str, ablation: str) -> bool:
    return name.startswith(excluded_parameters(ablation))


def _batched(x, ndim_unbatched: int = 3) -> tuple[Tensor, bool]:
    x = as_tensor(x)
    if x.ndim == ndim_unbatched:
        return ops.reshape(x, (1, *x.shape)), True
    if x.ndim != ndim_unbatched + 1:
        raise ShapeMismatch(f"expected {ndim_unbatched} or {ndim_unbatched + 1} axes, got {list(x.shape)}")
    return x, False


def project_input(x, params) -> Tensor:
    """Gated linear projection (σ(x W0) ⊗ x W1) followed by the τ→υ time map W2.

    ``x`` is B×n×τ×c_in (or n×τ×c_in); the result is B×n×υ×d.
    """
    x, squeeze = _batched(x)
    if x.shape[-1] != params.w0.shape[0] or x.shape[-2] != params.w2.shape[0]:
        raise ShapeMismatch(f"input {list(x.shape)} does not match projection "
                            f"(channels {params.w0.shape[0]}, steps {params.w2.shape[0]})")
    gated = ops.mul(ops.sigmoid(ops.matmul(x, params.w0)), ops.matmul(x, params.w1))
    timed = ops.matmul(ops.swapaxes(gated, -1, -2), params.w2)
    out = ops.swapaxes(timed, -1, -2)
    return ops.reshape(out, out.shape[1:]) if squeeze else out


def fuse_experts(hyper, trans, params, activation: str = "identity") -> Tensor:
    """Mixture-of-experts gate over the two expert outputs."""
    return gated_fuse(hyper, trans, params, activation)


def readout(fused, params) -> tuple[Tensor, Tensor | None]:
    """Map d→c. Returns (mu, logvar); logvar is log(exp(raw) + 1e-6) when the variance head exists."""
    fused = as_tensor(fused)
    mu = ops.add(ops.matmul(fused, params.w_mu), params.b_mu)
    if params.w_var is None:
        return mu, None
    raw = ops.add(ops.matmul(fused, params.w_var), params.b_var)
    return mu, ops.log(ops.add(ops.exp(raw), VARIANCE_FLOOR))


def model_inputs(x, mask, config: ModelConfig) -> Tensor:
    """Zero-fill missing entries and append the mask as an extra channel."""
    values = np.asarray(x.values if isinstance(x, Tensor) else x, dtype=np.float64)
    if mask is None:
        mask = np.ones_like(values)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != values.shape:
        raise ShapeMismatch(f"mask {list(mask.shape)} does not match input {list(values.shape)}")
    filled = np.where(mask > 0, values, 0.0)
    if config.mask_channel:
        filled = np.concatenate([filled, mask], axis=-1)
    return constant(filled)


def forward(x, config: ModelConfig, params: ModelParams, rng: np.random.Generator | None = None,
            mask=None, trace: AttentionTrace | None = None) -> ModelOutput:
    """Full forward pass in normalized scale.

    ``rng`` switches on training behaviour (Gumbel noise and dropout); without
    it the pass is deterministic.
    """
    inputs = model_inputs(x, mask, config)
    projected = project_input(inputs, params.projection)
    ablation = config.ablation
    dropout = config.dropout

    incidence = None
    hyper = None
    if ablation in ("full", "no_temporal", "no_sttn"):
        incidence = learn_structure(params.structure, config, rng=rng)
        if ablation == "no_temporal":
            hyper = hgat_forward(projected, incidence, params.hgrl.hgat, activation=config.hgat_activation,
                                 dropout=dropout, rng=rng, trace=trace)
        else:
            if trace is not None:
                hgat_forward(projected, incidence, params.hgrl.hgat, activation=config.hgat_activation,
                             trace=trace)
            hyper = hgrl_unroll(projected, incidence, params.hgrl, activation=config.hgat_activation,
                                dropout=dropout, rng=rng)

    trans = None
    if ablation in ("full", "no_temporal", "no_sthgcn"):
        trans = sttn_forward(projected, params.sttn, config.heads, post_norm=config.post_norm,
                             initial_connection=config.initial_connection, dropout=dropout, rng=rng,
                             temporal=ablation != "no_temporal")

    if ablation == "no_spatial":
        fused = projected
    elif hyper is not None and trans is not None:
        fused = fuse_experts(hyper, trans, params.fusion, config.output_activation)
    else:
        fused = hyper if hyper is not None else trans

    mu, logvar = readout(fused, params.readout)
    return ModelOutput(mu=mu, logvar=logvar, incidence=incidence)


def predict(x, config: ModelConfig, params: ModelParams, mask=None) -> Forecast:
    """Deterministic forecast in normalized scale."""
    out = forward(x, config, params, rng=None, mask=mask)
    sigma = None if out.logvar is None else np.sqrt(np.exp(out.logvar.values))
    return Forecast(point=out.mu.numpy(), sigma=sigma, scale="normalized")


def denormalize_forecast(forecast: Forecast, normalizer: Normalizer) -> Forecast:
    point = normalizer.denormalize(forecast.point, window=True)
    sigma = None if forecast.sigma is None else normalizer.denormalize_spread(forecast.sigma, window=True)
    return Forecast(point=point, sigma=sigma, scale="original")


# ── losses ──────────────────────────────────────────────────────────────────

def _masked_target(pred: Tensor, target, mask):
    target = np.asarray(target.values if isinstance(target, Tensor) else target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ShapeMismatch(f"prediction {list(pred.shape)} vs target {list(target.shape)}")
    if mask is None:
        mask = np.ones_like(target)
    mask = np.asarray(mask.values if isinstance(mask, Tensor) else mask, dtype=np.float64)
    if mask.shape != target.shape:
        raise ShapeMismatch(f"mask {list(mask.shape)} vs target {list(target.shape)}")
    count = float(mask.sum())
    if count == 0:
        raise EmptyMask("no observed target entries")
    return np.where(mask > 0, target, 0.0), mask, count


def mae_loss(pred, target, mask=None) -> Tensor:
    """Mean absolute error over observed entries."""
    pred = as_tensor(pred)
    filled, mask, count = _masked_target(pred, target, mask)
    err = ops.mul(ops.abs(ops.sub(pred, constant(filled))), constant(mask))
    return ops.div(ops.sum(err), count)


def gaussian_nll_loss(mu, logvar, target, mask=None) -> Tensor:
    """Mean over observed entries of logvar/2 + (target − mu)² / (2 exp(logvar))."""
    mu, logvar = as_tensor(mu), as_tensor(logvar)
    if logvar.shape != mu.shape:
        raise ShapeMismatch(f"mu {list(mu.shape)} vs logvar {list(logvar.shape)}")
    filled, mask, count = _masked_target(mu, target, mask)
    resid = ops.sub(constant(filled), mu)
    sq = ops.mul(resid, resid)
    term = ops.add(ops.mul(logvar, 0.5), ops.div(sq, ops.mul(ops.exp(logvar), 2.0)))
    return ops.div(ops.sum(ops.mul(term, constant(mask))), count)


def compute_loss(output: ModelOutput, target, mask, loss: str) -> Tensor:
    if loss == "gaussian_nll":
        if output.logvar is None:
            raise ConfigError("gaussian_nll loss needs model.uncertainty = true")
        return gaussian_nll_loss(output.mu, output.logvar, target, mask)
    return mae_loss(output.mu, target, mask)

"""Training loop: Adam with global-norm clipping, plateau LR halving, early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..core.tape import Tape, backward
from ..errors import DataError, Diverged, NonFiniteValue
from ..models.config import ModelConfig, TrainConfig
from ..models.series import Normalizer, WindowBatch
from ..tasks.prefetch import BatchPrefetcher
from ..utils.seeding import SeedStreams, seed_streams
from .data_service import iter_batches
from .forecaster_service import compute_loss, forward
from .metrics_service import evaluate

log = logging.getLogger("hf.train")

HISTORY_COLUMNS = ["epoch", "train_loss", "val_mae", "lr"]


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def clip_gradients(grads: dict, max_norm: float) -> tuple[dict, float]:
    """Scale all gradients so their global L2 norm is at most ``max_norm`` (0 disables)."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values() if g is not None)))
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    factor = max_norm / norm
    return {k: None if g is None else g * factor for k, g in grads.items()}, norm


def adam_step(params: dict, grads: dict, state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, grad_clip: float = 0.0) -> float:
    """Bias-corrected Adam update applied in place; returns the pre-clip gradient norm.

    Parameters without a gradient are treated as having a zero gradient.
    """
    grads, norm = clip_gradients(grads, grad_clip)
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for name, t in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(t.values)
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - beta1) * g if m is None else beta1 * m + (1 - beta1) * g
        v = (1 - beta2) * g * g if v is None else beta2 * v + (1 - beta2) * g * g
        state.m[name], state.v[name] = m, v
        t.values -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return norm


class PlateauScheduler:
    """Halve the learning rate after ``patience`` epochs without a strict improvement."""

    def __init__(self, lr: float, patience: int = 5, factor: float = 0.5):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.best = float("inf")
        self.bad_epochs = 0

    def step(self, metric: float) -> bool:
        if metric < self.best:
            self.best = metric
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            self.lr *= self.factor
            self.bad_epochs = 0
            return True
        return False


@dataclass
class TrainResult:
    best_state: dict
    history: list
    best_epoch: int
    best_val_mae: float
    steps: int
    stopped_early: bool = False


def _batches(windows, batch_size, rng, prefetch_depth):
    source = iter_batches(windows, batch_size, rng=rng)
    if prefetch_depth > 0:
        return BatchPrefetcher(source, depth=prefetch_depth)
    return source


def train(params, config: ModelConfig, train_config: TrainConfig, train_windows: WindowBatch,
          val_windows: WindowBatch, normalizer: Normalizer | None = None,
          streams: SeedStreams | None = None, prefetch_depth: int = 4) -> TrainResult:
    """Fit ``params`` in place and leave them at the best validation checkpoint."""
    config.validate()
    train_config.validate()
    streams = streams if streams is not None else seed_streams(train_config.seed)
    named = dict(params.named_parameters())
    state = AdamState()
    scheduler = PlateauScheduler(train_config.lr, train_config.plateau_patience)
    depth = prefetch_depth if train_config.prefetch else 0

    best_state = params.state_dict()
    best_val, best_epoch, since_best = float("inf"), 0, 0
    history, steps, stopped_early = [], 0, False
    log.info("Training %s model: %d parameters, %d train windows, %d val windows",
             config.ablation, params.count(), train_windows.size, val_windows.size)

    for epoch in range(1, train_config.epochs + 1):
        lr = scheduler.lr
        losses = []
        for batch in _batches(train_windows, train_config.batch_size, streams.shuffle, depth):
            steps += 1
            params.zero_grad()
            try:
                with Tape() as tape:
                    out = forward(batch.inputs, config, params, rng=streams.noise, mask=batch.input_mask)
                    loss = compute_loss(out, batch.targets, batch.target_mask, train_config.loss)
            except NonFiniteValue as exc:
                raise Diverged(epoch, steps, f"nan ({exc})") from exc
            value = loss.item()
            if not np.isfinite(value):
                raise Diverged(epoch, steps, value)
            backward(loss, tape)
            adam_step(named, {k: t.grad for k, t in named.items()}, state, lr,
                      train_config.beta1, train_config.beta2, train_config.adam_eps, train_config.grad_clip)
            losses.append(value)
            if train_config.max_steps and steps >= train_config.max_steps:
                break
        if not losses:
            raise DataError("no training batch has observed targets")

        val_mae = evaluate(params, config, val_windows, normalizer, train_config.batch_size).mae
        train_loss = float(np.mean(losses))
        history.append({"epoch": epoch, "train_loss": train_loss, "val_mae": val_mae, "lr": lr})
        log.info("epoch %d: train_loss=%.5f val_mae=%.5f lr=%.2e", epoch, train_loss, val_mae, lr)

        if val_mae < best_val:
            best_val, best_epoch, since_best = val_mae, epoch, 0
            best_state = params.state_dict()
            log.info("New best checkpoint at epoch %d (val_mae=%.5f)", epoch, val_mae)
        else:
            since_best += 1
        if scheduler.step(val_mae):
            log.info("Validation plateau: lr halved to %.2e", scheduler.lr)
        if since_best >= train_config.early_stop_patience:
            log.info("Early stop after epoch %d (%d epochs without improvement)", epoch, since_best)
            stopped_early = True
            break
        if train_config.max_steps and steps >= train_config.max_steps:
            log.info("Step budget of %d reached", train_config.max_steps)
            break

    params.load_state_dict(best_state)
    return TrainResult(best_state=best_state, history=history, best_epoch=best_epoch,
                       best_val_mae=best_val, steps=steps, stopped_early=stopped_early)


def write_history(history: list, path) -> Path:
    path = Path(path)
    pd.DataFrame(history, columns=HISTORY_COLUMNS).to_csv(path, index=False)
    return path

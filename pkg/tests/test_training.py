"""Tests for the optimizer, LR scheduler and training loop."""

from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from hyperforecast.core.tensor import parameter
from hyperforecast.errors import ConfigError, Diverged, NonFiniteValue
from hyperforecast.models.config import ModelConfig, TrainConfig
from hyperforecast.models.series import Normalizer
from hyperforecast.services import training_service
from hyperforecast.services.data_service import make_windows, split_chronological
from hyperforecast.services.experiment_service import build_dataset, run_training
from hyperforecast.services.forecaster_service import init_params, predict
from hyperforecast.services.metrics_service import evaluate
from hyperforecast.services.runspec_service import RunSpec, resolve
from hyperforecast.services.synthetic_service import generate_synthetic
from hyperforecast.services.training_service import (
    HISTORY_COLUMNS, AdamState, PlateauScheduler, adam_step, clip_gradients, train, write_history,
)
from hyperforecast.utils.seeding import seed_streams


def _windows(table, config):
    train_part, val_part, _ = split_chronological(table, (6, 2, 2))
    norm = Normalizer().fit(train_part)
    return (make_windows(norm.transform(train_part), config.tau, config.upsilon),
            make_windows(norm.transform(val_part), config.tau, config.upsilon))


def _run(config, train_config, table, prefetch_depth=0):
    streams = seed_streams(train_config.seed)
    params = init_params(config, streams.init)
    tr, va = _windows(table, config)
    result = train(params, config, train_config, tr, va, streams=streams, prefetch_depth=prefetch_depth)
    return params, result


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        w = parameter([1.0, -2.0])
        adam_step({"w": w}, {"w": None}, AdamState(), lr=0.1)
        np.testing.assert_array_equal(w.values, [1.0, -2.0])

    def test_first_step_moves_by_lr(self):
        w = parameter([0.0, 0.0])
        adam_step({"w": w}, {"w": np.array([3.0, -0.2])}, AdamState(), lr=1e-3)
        np.testing.assert_allclose(w.values, [-1e-3, 1e-3], rtol=1e-6)

    def test_state_counts_steps(self):
        w = parameter([0.0])
        state = AdamState()
        for _ in range(3):
            adam_step({"w": w}, {"w": np.array([1.0])}, state, lr=1e-3)
        assert state.step == 3

    def test_clip(self):
        clipped, norm = clip_gradients({"a": np.array([100.0])}, 5.0)
        assert norm == pytest.approx(100.0)
        np.testing.assert_allclose(clipped["a"], [5.0])

    def test_clip_disabled(self):
        clipped, _ = clip_gradients({"a": np.array([100.0])}, 0.0)
        np.testing.assert_allclose(clipped["a"], [100.0])


class TestPlateauScheduler:
    def test_halves_after_patience(self):
        sched = PlateauScheduler(1e-3, patience=5)
        sched.step(1.0)
        halved = [sched.step(1.0) for _ in range(5)]
        assert halved == [False] * 4 + [True]
        assert sched.lr == pytest.approx(5e-4)

    def test_improvement_resets(self):
        sched = PlateauScheduler(1e-3, patience=2)
        sched.step(1.0)
        sched.step(1.0)
        sched.step(0.5)
        assert not sched.step(0.5)
        assert sched.lr == pytest.approx(1e-3)


class TestTrain:
    def test_rejects_zero_epochs(self, toy_config, synthetic_table):
        with pytest.raises(ConfigError):
            _run(toy_config, TrainConfig(epochs=0), synthetic_table)

    def test_history(self, toy_config, fast_train_config, synthetic_table, tmp_path):
        _, result = _run(toy_config, replace(fast_train_config, max_steps=0), synthetic_table)
        assert [row["epoch"] for row in result.history] == [1, 2]
        assert result.best_epoch in (1, 2)
        assert result.best_val_mae == min(row["val_mae"] for row in result.history)

        frame = pd.read_csv(write_history(result.history, tmp_path / "history.csv"))
        assert list(frame.columns) == HISTORY_COLUMNS
        assert len(frame) == 2

    def test_step_budget(self, toy_config, fast_train_config, synthetic_table):
        _, result = _run(toy_config, fast_train_config, synthetic_table)
        assert result.steps == 4
        assert len(result.history) == 1

    def test_reproducible(self, toy_config, fast_train_config, synthetic_table):
        params_a, a = _run(toy_config, fast_train_config, synthetic_table)
        params_b, b = _run(toy_config, fast_train_config, synthetic_table)
        assert a.history == b.history
        for key, value in params_a.state_dict().items():
            np.testing.assert_array_equal(value, params_b.state_dict()[key])

    def test_prefetch_gives_identical_run(self, toy_config, fast_train_config, synthetic_table):
        _, inline = _run(toy_config, fast_train_config, synthetic_table)
        _, threaded = _run(toy_config, replace(fast_train_config, prefetch=True), synthetic_table, prefetch_depth=2)
        assert inline.history == threaded.history

    def test_params_restored_to_best(self, toy_config, fast_train_config, synthetic_table):
        params, result = _run(toy_config, replace(fast_train_config, max_steps=0), synthetic_table)
        for key, value in result.best_state.items():
            np.testing.assert_array_equal(params.state_dict()[key], value)

    def test_early_stop(self, toy_config, synthetic_table, monkeypatch):
        monkeypatch.setattr(training_service, "evaluate", lambda *a, **k: SimpleNamespace(mae=1.0))
        cfg = TrainConfig(epochs=20, lr=1e-2, batch_size=64, early_stop_patience=3, plateau_patience=2)
        _, result = _run(toy_config, cfg, synthetic_table)
        assert result.stopped_early
        assert len(result.history) == 4
        assert result.best_epoch == 1
        assert result.history[-1]["lr"] == pytest.approx(5e-3)

    def test_divergence(self, toy_config, fast_train_config, synthetic_table, monkeypatch):
        def explode(*args, **kwargs):
            raise NonFiniteValue("exp produced inf")
        monkeypatch.setattr(training_service, "forward", explode)
        with pytest.raises(Diverged) as exc:
            _run(toy_config, fast_train_config, synthetic_table)
        assert exc.value.exit_code == 4
        assert exc.value.epoch == 1 and exc.value.step == 1


@pytest.mark.slow
def test_overfits_planted_structure():
    config = ModelConfig(n=8, tau=12, upsilon=3, d=8, m=2, dropout=0.0)
    table, _ = generate_synthetic(8, 400, 2, noise_std=0.005, rng=np.random.default_rng(0))
    train_windows, val_windows = _windows(table, config)
    params = init_params(config, np.random.default_rng(0))
    initial = evaluate(params, config, train_windows).mae

    tc = TrainConfig(epochs=100, lr=1e-2, batch_size=32, max_steps=300, early_stop_patience=100)
    train(params, config, tc, train_windows, val_windows, streams=seed_streams(0), prefetch_depth=0)
    final = evaluate(params, config, train_windows).mae
    assert final < 0.05
    assert final * 10 < initial


def _three_way(table, config, normalize=True):
    parts = split_chronological(table, (6, 2, 2))
    if normalize:
        norm = Normalizer().fit(parts[0])
        parts = [norm.transform(p) for p in parts]
    return [make_windows(p, config.tau, config.upsilon) for p in parts]


@pytest.mark.slow
def test_structure_beats_no_spatial_on_leading_blocks():
    # followers trail their block leader by 3 steps on a shared disturbance,
    # so their next 3 steps are visible only in the leader's window
    ratios = []
    for seed in range(5):
        table, _ = generate_synthetic(8, 500, 2, noise_std=0.05, rng=np.random.default_rng(seed),
                                      disturbance=1.0, lead=3)
        maes = {}
        for ablation in ("full", "no_spatial"):
            config = ModelConfig(n=8, tau=12, upsilon=3, d=8, m=2, dropout=0.0, ablation=ablation)
            train_w, val_w, test_w = _three_way(table, config)
            params = init_params(config, np.random.default_rng(seed))
            tc = TrainConfig(epochs=40, lr=1e-2, batch_size=32, max_steps=300, seed=seed)
            train(params, config, tc, train_w, val_w, streams=seed_streams(seed), prefetch_depth=0)
            maes[ablation] = evaluate(params, config, test_w).mae
        ratios.append(maes["full"] / maes["no_spatial"])
    assert np.median(ratios) <= 0.9


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3))
def test_variance_head_recovers_noise_levels(seed):
    config = ModelConfig(n=4, tau=12, upsilon=3, d=8, m=2, dropout=0.0, uncertainty=True)
    table, _ = generate_synthetic(4, 500, 2, noise_std=0.0, rng=np.random.default_rng(seed))
    gen = np.random.default_rng(100 + seed)
    offset = np.array([1.0, 1.0, -1.0, -1.0]).reshape(1, 4, 1, 1)
    sigma = np.array([0.1, 0.1, 0.5, 0.5]).reshape(1, 4, 1, 1)

    def with_targets(w, noisy):
        noise = gen.normal(size=w.targets.shape) * sigma if noisy else 0.0
        return replace(w, inputs=w.inputs + offset, targets=w.targets + offset + noise)

    train_w, val_w, test_w = _three_way(table, config, normalize=False)
    train_w, val_w, test_w = with_targets(train_w, True), with_targets(val_w, False), with_targets(test_w, True)
    tc = TrainConfig(epochs=100, lr=1e-2, batch_size=32, loss="gaussian_nll", max_steps=800,
                     early_stop_patience=100, seed=seed)
    params = init_params(config, np.random.default_rng(seed))
    train(params, config, tc, train_w, val_w, streams=seed_streams(seed), prefetch_depth=0)

    fc = predict(test_w.inputs, config, params, mask=test_w.input_mask)
    assert fc.sigma[:, :2].mean() == pytest.approx(0.1, rel=0.2)
    assert fc.sigma[:, 2:].mean() == pytest.approx(0.5, rel=0.2)


@pytest.mark.slow
def test_held_out_error_grows_with_missing_ratio():
    maes = {}
    for ratio in (0.1, 0.3, 0.5):
        runs = []
        for seed in (0, 1):
            exp = resolve(RunSpec("train", overrides=[
                "data.synthetic=true", "data.synthetic_n=4", "data.synthetic_t=400",
                "data.missing=point", f"data.missing_ratio={ratio}",
                "model.tau=12", "model.upsilon=3", "model.d=8", "model.m=2", "model.dropout=0",
                "train.lr=0.01", "train.epochs=40", "train.max_steps=300", "train.batch_size=32",
            ], seed=seed))
            streams = seed_streams(seed)
            dataset = build_dataset(exp, streams)
            runs.append(run_training(exp, dataset, streams, prefetch_depth=0).test.mae)
        maes[ratio] = float(np.mean(runs))
    assert maes[0.1] <= maes[0.3] <= maes[0.5]

"""Command-line interface.

Every command resolves its configuration the same way (defaults, preset,
``--config`` file, ``--set`` overrides, dedicated flags), writes
``resolved_config.txt`` into ``--out`` and exits with the code of the
error class on failure.
"""

from __future__ import annotations

import functools
import logging
from pathlib import Path

import click

from . import create_runtime
from .errors import HyperforecastError
from .models.config import ABLATIONS, LOSSES, OUTPUT_ACTIVATIONS
from .services import export_service
from .services.checkpoint_service import check_compatible, load_checkpoint, save_checkpoint
from .services.data_service import write_csv
from .services.experiment_service import (
    build_dataset, parse_grid, run_ablations, run_sweep, run_training,
)
from .services.forecaster_service import forward, init_params
from .services.hgat_service import AttentionTrace
from .services.metrics_service import evaluate as evaluate_windows
from .services.metrics_service import forecast_windows
from .services.runspec_service import RunSpec, resolve
from .services.structure_service import edge_density, harden_incidence, learn_structure
from .services.synthetic_service import generate_synthetic
from .services.training_service import write_history
from .utils.presets import SENSITIVITY_GRID
from .utils.seeding import seed_streams

log = logging.getLogger("hf.cli")


def _config_options(fn):
    """Options shared by every command that resolves an experiment config."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="Config file of 'section.key = value' lines"),
        click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                     help="Override one config key (repeatable)"),
        click.option("--seed", type=int, default=None, help="Run seed"),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Output directory"),
        click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None,
                     help="CSV with one column per series"),
        click.option("--synthetic", is_flag=True, default=None, help="Use generated block-periodic data"),
        click.option("--ablation", type=click.Choice(ABLATIONS), default=None),
        click.option("--loss", type=click.Choice(LOSSES), default=None,
                     help="gaussian_nll also enables the variance head"),
        click.option("--missing", type=click.Choice(["none", "point", "block"]), default=None),
        click.option("--missing-ratio", type=float, default=None),
        click.option("--output-activation", type=click.Choice(OUTPUT_ACTIVATIONS), default=None),
        click.option("--post-norm", is_flag=True, default=None, help="LayerNorm after each residual"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _exit_on_error(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HyperforecastError as exc:
            log.error("%s: %s", type(exc).__name__, exc)
            raise SystemExit(exc.exit_code)
    return wrapper


def _flags(opts: dict) -> dict:
    flags = {
        "data.path": opts.get("data_path"),
        "data.synthetic": opts.get("synthetic") or None,
        "model.ablation": opts.get("ablation"),
        "train.loss": opts.get("loss"),
        "data.missing": opts.get("missing"),
        "data.missing_ratio": opts.get("missing_ratio"),
        "model.output_activation": opts.get("output_activation"),
        "model.post_norm": opts.get("post_norm") or None,
    }
    if opts.get("loss") == "gaussian_nll":
        flags["model.uncertainty"] = True
    return flags


def _prepare(ctx, command: str, opts: dict):
    """Resolve the config, create the output directory and record the config there."""
    runtime = ctx.obj
    spec = RunSpec(command, opts.get("config_path"), list(opts.get("overrides") or ()),
                   opts.get("seed"), opts.get("out_dir"), default_seed=runtime.get("DEFAULT_SEED"))
    exp = resolve(spec, _flags(opts))
    out = Path(spec.out_dir or runtime.get("OUTPUT_DIR", "runs"))
    out.mkdir(parents=True, exist_ok=True)
    export_service.write_resolved_config(out, exp.to_text())
    return exp, out


def _restore(checkpoint, exp, streams):
    """Model config, parameters and dataset for a saved checkpoint.

    The run's own model config must agree with the checkpoint on every
    architecture field; its other fields (activations, thresholds) apply.
    """
    saved, state = load_checkpoint(checkpoint)
    dataset = build_dataset(exp, streams)
    config = exp.model_config(dataset.n, dataset.c)
    check_compatible(saved, config)
    params = init_params(config, streams.init)
    params.load_state_dict(state)
    return config, params, dataset


@click.group()
@click.option("--env", "env_name", default=None, help="Runtime profile: dev, prod or test (default HF_ENV)")
@click.pass_context
def cli(ctx, env_name):
    """Hypergraph forecaster for multivariate time series."""
    if ctx.obj is None:
        ctx.obj = create_runtime(env_name)


@cli.command()
@_config_options
@click.pass_context
@_exit_on_error
def train(ctx, **opts):
    """Train a model, keep the best validation snapshot and score it on test."""
    exp, out = _prepare(ctx, "train", opts)
    streams = seed_streams(exp.train.seed)
    dataset = build_dataset(exp, streams)
    outcome = run_training(exp, dataset, streams, prefetch_depth=ctx.obj.get("PREFETCH_BATCHES", 0))

    save_checkpoint(out / "checkpoint.ckpt", outcome.config, outcome.result.best_state)
    write_history(outcome.result.history, out / "history.csv")
    export_service.write_metrics(out / "metrics.csv", outcome.test)
    click.echo(f"best epoch {outcome.result.best_epoch}: val MAE {outcome.result.best_val_mae:.4f}, "
               f"test MAE {outcome.test.mae:.4f} RMSE {outcome.test.rmse:.4f}")


@cli.command()
@_config_options
@click.option("--checkpoint", type=click.Path(dir_okay=False), required=True)
@click.pass_context
@_exit_on_error
def forecast(ctx, checkpoint, **opts):
    """Write per-series forecasts for the test windows."""
    exp, out = _prepare(ctx, "forecast", opts)
    streams = seed_streams(exp.train.seed)
    config, params, dataset = _restore(checkpoint, exp, streams)
    fc = forecast_windows(params, config, dataset.test, dataset.normalizer, exp.train.batch_size)
    truth = dataset.normalizer.denormalize(dataset.test.targets, window=True)
    written = export_service.write_forecasts(out, dataset.table.names, fc, truth, dataset.test.target_mask)
    click.echo(f"wrote {len(written)} forecast file(s) to {out}")


@cli.command()
@_config_options
@click.option("--checkpoint", type=click.Path(dir_okay=False), required=True)
@click.pass_context
@_exit_on_error
def evaluate(ctx, checkpoint, **opts):
    """Score a checkpoint on the test windows."""
    exp, out = _prepare(ctx, "evaluate", opts)
    streams = seed_streams(exp.train.seed)
    config, params, dataset = _restore(checkpoint, exp, streams)
    report = evaluate_windows(params, config, dataset.test, dataset.normalizer, exp.train.batch_size)
    export_service.write_metrics(out / "metrics.csv", report)
    click.echo(f"test MAE {report.mae:.4f} RMSE {report.rmse:.4f} MAPE {report.mape:.4f}")


@cli.command()
@_config_options
@click.option("--variant", "variants", multiple=True, type=click.Choice(ABLATIONS),
              help="Restrict to these variants (default: all)")
@click.pass_context
@_exit_on_error
def ablate(ctx, variants, **opts):
    """Train every ablation variant with the same seed and compare against the full model."""
    exp, out = _prepare(ctx, "ablate", opts)
    chosen = variants or ABLATIONS
    if "full" not in chosen:
        chosen = ("full", *chosen)
    results = run_ablations(exp, chosen, prefetch_depth=ctx.obj.get("PREFETCH_BATCHES", 0))
    export_service.write_ablation(out / "ablation.csv", results)
    failed = [v for v, r in results.items() if isinstance(r, str)]
    click.echo(f"{len(results) - len(failed)} of {len(results)} variant(s) finished; see {out / 'ablation.csv'}")


@cli.command("gen-synthetic")
@click.option("--n", "n", type=int, default=8, show_default=True)
@click.option("--t", "T", type=int, default=400, show_default=True)
@click.option("--m", "m_true", type=int, default=2, show_default=True)
@click.option("--noise", type=float, multiple=True, help="Noise std (once, or once per block)")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.pass_context
@_exit_on_error
def gen_synthetic(ctx, n, T, m_true, noise, seed, out_dir):
    """Generate block-periodic series with a planted hypergraph."""
    out = Path(out_dir or ctx.obj.get("OUTPUT_DIR", "runs"))
    out.mkdir(parents=True, exist_ok=True)
    seed = ctx.obj.get("DEFAULT_SEED") if seed is None else seed
    noise_std = 0.05 if not noise else (noise[0] if len(noise) == 1 else list(noise))
    table, planted = generate_synthetic(n, T, m_true, noise_std=noise_std, rng=seed_streams(seed).data)
    write_csv(table, out / "synthetic.csv")
    export_service.write_matrix(out / "planted_incidence.csv", planted.astype(int), table.names, "edge")
    export_service.write_resolved_config(
        out, f"n = {n}\nT = {T}\nm = {m_true}\nnoise = {noise_std}\nseed = {seed}\n")
    click.echo(f"wrote {out / 'synthetic.csv'} ({n} series x {T} steps)")


@cli.command("export-structure")
@_config_options
@click.option("--checkpoint", type=click.Path(dir_okay=False), required=True)
@click.option("--attention", is_flag=True, help="Also export mean HgAT attention over the test windows")
@click.pass_context
@_exit_on_error
def export_structure(ctx, checkpoint, attention, **opts):
    """Export the learned soft and hard incidence matrices."""
    exp, out = _prepare(ctx, "export-structure", opts)
    streams = seed_streams(exp.train.seed)
    config, params, dataset = _restore(checkpoint, exp, streams)
    soft = learn_structure(params.structure, config, rng=None)
    hard = harden_incidence(soft, config.harden_threshold)
    export_service.write_structure(out, dataset.table.names, soft, hard)
    log.info("Hard structure density %.3f", edge_density(hard))

    if attention:
        trace = AttentionTrace()
        test = dataset.test
        for lo in range(0, test.size, exp.train.batch_size):
            part = test.subset(slice(lo, lo + exp.train.batch_size))
            forward(part.inputs, config, params, rng=None, mask=part.input_mask, trace=trace)
        alpha, beta = trace.mean("alpha"), trace.mean("beta")
        if alpha is None:
            log.warning("The %s variant has no hypergraph attention to export", config.ablation)
        export_service.write_attention(out, dataset.table.names, alpha, beta)
    click.echo(f"wrote structure files to {out}")


@cli.command()
@_config_options
@click.option("--grid", "grid_items", multiple=True, metavar="KEY=V1,V2",
              help="Values to sweep for one key (repeatable)")
@click.pass_context
@_exit_on_error
def sweep(ctx, grid_items, **opts):
    """Train over the cartesian product of grid values.

    Without --grid, each documented sensitivity range is swept on its own
    while the other keys keep their configured values.
    """
    exp, out = _prepare(ctx, "sweep", opts)
    grid = parse_grid(grid_items)
    one_at_a_time = not grid
    if one_at_a_time:
        grid = {k: [str(v) for v in values] for k, values in SENSITIVITY_GRID.items()}
    rows = run_sweep(exp, grid, one_at_a_time=one_at_a_time,
                     prefetch_depth=ctx.obj.get("PREFETCH_BATCHES", 0))
    export_service.write_sweep(out / "sweep.csv", rows)
    best = min((r for r in rows if r.get("status") == "ok"), key=lambda r: r["val_mae"], default=None)
    if best is not None:
        click.echo("best: " + ", ".join(f"{k}={best[k]}" for k in grid if k in best) + f" (val MAE {best['val_mae']:.4f})")
    click.echo(f"wrote {len(rows)} sweep row(s) to {out / 'sweep.csv'}")


def main():
    cli(prog_name="hyperforecast")


if __name__ == "__main__":
    main()

# cli.py - Typer-based CLI for nearbest
import json
import os
from typing import List, Optional

import typer

from nearbest.config import get_map_tolerance, get_output_dir, get_thread_count
from nearbest.constants import VALID_RATE_MODELS, Mode
from nearbest.exceptions import ConfigError, NearBestError
from nearbest.harness import (
    ENTABLE_HEADER,
    construct_one,
    entable_records,
    export_geometry,
    fit_rate,
    run_scenario,
    verify_suite,
    write_run,
)
from nearbest.logger import log_exception, set_log_level
from nearbest.plotting import plot_columns
from nearbest.result_store import ResultStore, json_safe, read_csv
from nearbest.schemas import ExperimentConfig, load_config, with_overrides

EXIT_INVARIANT = 1
EXIT_CONFIG = 2

app = typer.Typer(
    help="Near-best polynomial approximation of piecewise analytic functions on arcs",
    context_settings={"obj": {}},
    no_args_is_help=True,
)


@app.callback()
def main(
    ctx: typer.Context,
    out: Optional[str] = typer.Option(None, "--out", "-o", help="Output directory (default: config, then NEARBEST_OUT_DIR)"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Exterior-map accuracy (overrides the config)"),
    panels: Optional[int] = typer.Option(None, "--panels", help="Minimum outer quadrature panels per ray"),
    threads: int = typer.Option(get_thread_count(), "--threads", "-j", help="Worker threads for the degree sweep"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log progress to the console"),
):
    """
    Global options shared by every command. ``--tol`` falls back to
    NEARBEST_MAP_TOL when neither the flag nor the config sets it.
    """
    if verbose:
        set_log_level("INFO")
    if threads < 1:
        typer.echo("⛔️  --threads must be at least 1", err=True)
        raise typer.Exit(EXIT_CONFIG)
    ctx.obj["out"] = out
    ctx.obj["tol"] = tol
    ctx.obj["panels"] = panels
    ctx.obj["threads"] = threads


def _load(ctx: typer.Context, path: str) -> ExperimentConfig:
    """Config with the global overrides applied; config errors exit with status 2."""
    try:
        config = load_config(path)
        tol = ctx.obj.get("tol")
        if tol is None and "NEARBEST_MAP_TOL" in os.environ:
            tol = get_map_tolerance()
        return with_overrides(config, tol=tol, panels=ctx.obj.get("panels"))
    except ConfigError as e:
        typer.echo(f"⛔️  {e}", err=True)
        raise typer.Exit(EXIT_CONFIG)


def _store(ctx: typer.Context, config: Optional[ExperimentConfig] = None) -> ResultStore:
    directory = ctx.obj.get("out")
    if directory is None and config is not None:
        directory = config.output.directory
    return ResultStore(directory or get_output_dir())


def _fail_build(e: NearBestError) -> None:
    log_exception(e, "Scenario could not be built")
    typer.echo(f"⛔️  {type(e).__name__}: {e}", err=True)
    raise typer.Exit(EXIT_CONFIG)


@app.command("run", help="Full pipeline: E_n table and near-best rows to CSV + JSON")
def run(ctx: typer.Context, config_path: str = typer.Argument(..., metavar="CONFIG")):
    config = _load(ctx, config_path)
    try:
        result = run_scenario(config, ctx.obj["threads"])
    except NearBestError as e:
        _fail_build(e)
    paths = write_run(result, _store(ctx, config))
    for kind, path in paths.items():
        typer.echo(f"{kind}: {path}")
    for row in result.failed_rows:
        typer.echo(f"⚠️  n={row.n}: {row.error}", err=True)
    if result.failed_rows:
        raise typer.Exit(EXIT_INVARIANT)


@app.command("entable", help="Best-approximation errors E_n only")
def entable(ctx: typer.Context, config_path: str = typer.Argument(..., metavar="CONFIG")):
    config = _load(ctx, config_path)
    config = config.model_copy(update={"mode": Mode.BESTAPPROX})
    try:
        result = run_scenario(config, ctx.obj["threads"])
    except NearBestError as e:
        _fail_build(e)
    path = _store(ctx, config).write_csv(f"{config.prefix}_entable.csv", ENTABLE_HEADER, entable_records(result))
    typer.echo(path)


@app.command("construct", help="Construct one near-best polynomial and export it as JSON")
def construct(
    ctx: typer.Context,
    config_path: str = typer.Argument(..., metavar="CONFIG"),
    n: int = typer.Option(..., "--n", "-n", help="Target degree"),
):
    config = _load(ctx, config_path)
    try:
        P = construct_one(config, n)
    except NearBestError as e:
        _fail_build(e)
    path = _store(ctx, config).write_json(f"{config.prefix}_n{n}.json", json_safe(P.to_json()))
    typer.echo(path)


@app.command("rates", help="Fit a decay model to a CSV column")
def rates(
    csv_path: str = typer.Argument(..., metavar="CSV"),
    model: str = typer.Option("geometric", "--model", "-m", help=f"One of {', '.join(VALID_RATE_MODELS)}"),
    column: str = typer.Option("sup_L_err", "--column", "-c", help="Column to fit"),
    sigma: float = typer.Option(0.5, "--sigma", help="Exponent of the stretched model"),
):
    if model not in VALID_RATE_MODELS:
        typer.echo(f"⛔️  Unknown model {model!r}; use one of {', '.join(VALID_RATE_MODELS)}", err=True)
        raise typer.Exit(EXIT_CONFIG)
    try:
        rows = read_csv(csv_path)
    except OSError as e:
        typer.echo(f"⛔️  Cannot read {csv_path}: {e}", err=True)
        raise typer.Exit(EXIT_CONFIG)
    if rows and column not in rows[0]:
        typer.echo(f"⛔️  Column {column!r} not in {csv_path}", err=True)
        raise typer.Exit(EXIT_CONFIG)
    try:
        fit = fit_rate(rows, model, column, sigma)
    except NearBestError as e:
        typer.echo(f"⛔️  {e}", err=True)
        raise typer.Exit(EXIT_INVARIANT)
    typer.echo(json.dumps(json_safe(fit.as_dict()), indent=2))
    if fit.no_decay:
        typer.echo("⚠️  no decay", err=True)


@app.command("verify", help="Run the invariant suite; exit status 1 if a hard check fails")
def verify(
    ctx: typer.Context,
    config_path: str = typer.Argument(..., metavar="CONFIG"),
    skip_oracle: bool = typer.Option(False, "--skip-oracle", help="Skip the segment oracle block"),
):
    config = _load(ctx, config_path)
    report = verify_suite(config, ctx.obj["threads"], oracle=not skip_oracle)
    for line in report.lines():
        typer.echo(line)
    _store(ctx, config).write_json(f"{config.prefix}_verify.json", json_safe(report.as_dict()))
    typer.echo(("✅ " if report.passed else "❌ ") + report.summary())
    raise typer.Exit(report.exit_code)


@app.command("export-geometry", help="Arc, Γ-rays and level lines as CSV")
def export_geometry_cmd(ctx: typer.Context, config_path: str = typer.Argument(..., metavar="CONFIG")):
    config = _load(ctx, config_path)
    try:
        path = export_geometry(config, _store(ctx, config))
    except NearBestError as e:
        _fail_build(e)
    typer.echo(path)


@app.command("plot", help="SVG line chart of CSV columns against n")
def plot(
    ctx: typer.Context,
    csv_path: str = typer.Argument(..., metavar="CSV"),
    columns: List[str] = typer.Option(["E_n", "sup_L_err"], "--column", "-c", help="Column(s) to plot"),
    linear: bool = typer.Option(False, "--linear", help="Linear instead of logarithmic y axis"),
):
    store = _store(ctx)
    name = os.path.splitext(os.path.basename(csv_path))[0] + ".svg"
    try:
        path = plot_columns(csv_path, columns, store.path(name), logy=not linear)
    except (NearBestError, OSError) as e:
        typer.echo(f"⛔️  {e}", err=True)
        raise typer.Exit(EXIT_CONFIG)
    typer.echo(path)

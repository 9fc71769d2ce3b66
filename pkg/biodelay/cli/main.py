"""
biodelay CLI Main Entry Point

CLI bootstrap using Typer for routing commands: fit, stability, regions, simulate.
"""

import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import typer
from dotenv import load_dotenv

# Library defaults read BIODELAY_* at import time
load_dotenv()

from rich.logging import RichHandler  # noqa: E402

from ..config.fields import ValidationError  # noqa: E402
from ..config.schema import RunConfig, default_run_config, load_run_config  # noqa: E402
from ..core.constants import DEFAULT_LOG_LEVEL, DEFAULT_OUT_DIR  # noqa: E402
from ..core.errors import (  # noqa: E402
    DatasetError,
    DegenerateError,
    DomainError,
    EmptyRegionError,
    NoEquilibriumError,
    StepSizeError,
    StructureError,
    UnstableAtZeroDelayError,
)
from .commands import fit as fit_module  # noqa: E402
from .commands import regions as regions_module  # noqa: E402
from .commands import simulate as simulate_module  # noqa: E402
from .commands import stability as stability_module  # noqa: E402
from .utils.fs import prepare_output_dir, run_metadata  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2
EXIT_NO_EQUILIBRIUM = 4

INPUT_ERRORS = (
    ValidationError,
    IOError,
    DatasetError,
    DomainError,
    StructureError,
    StepSizeError,
    UnstableAtZeroDelayError,
    EmptyRegionError,
    DegenerateError,
)

app = typer.Typer(
    name="biodelay",
    help="Stability analysis, delayed control and identification of a delayed bioreactor model",
    add_completion=False,
)

Runner = Callable[[RunConfig, Path, Dict[str, Any]], int]


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else os.getenv("BIODELAY_LOG_LEVEL", DEFAULT_LOG_LEVEL)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(show_path=False)],
        force=True,
    )


def exit_code_for(error: Exception) -> int:
    """Map a library or input error to the documented exit code."""
    if isinstance(error, NoEquilibriumError):
        return EXIT_NO_EQUILIBRIUM
    if isinstance(error, INPUT_ERRORS):
        return EXIT_INPUT_ERROR
    return EXIT_FAILURE


def _run(
    command: str,
    config_path: Optional[Path],
    out: Path,
    seed: Optional[int],
    verbose: bool,
    runner: Runner,
) -> None:
    configure_logging(verbose)
    try:
        if config_path is not None:
            config = load_run_config(config_path, command)
        else:
            config = default_run_config(command)
        out_dir = prepare_output_dir(out)
        metadata = run_metadata(config)
        metadata["seed"] = seed
        status = runner(config, out_dir, metadata)
    except Exception as e:
        logger.error(f"{command} failed: {e}")
        typer.echo(f"❌ Error: {e}", err=True)
        raise typer.Exit(exit_code_for(e))
    if status != 0:
        typer.echo(f"❌ {command} did not converge; results written to {out_dir}", err=True)
        raise typer.Exit(status)
    typer.echo(f"✅ {command} results written to {out_dir}")


ConfigOption = typer.Option(None, "--config", help="Run configuration JSON")
OutOption = typer.Option(Path(DEFAULT_OUT_DIR), "--out", help="Output directory")
SeedOption = typer.Option(None, "--seed", help="Reserved; recorded in the metadata")
VerboseOption = typer.Option(False, "--verbose", help="Enable verbose logging")


@app.command()
def fit(
    config: Optional[Path] = ConfigOption,
    out: Path = OutOption,
    seed: Optional[int] = SeedOption,
    verbose: bool = VerboseOption,
    data: Optional[Path] = typer.Option(None, "--data", help="Dataset CSV"),
) -> None:
    """Fit the model constants to a batch dataset."""

    def runner(cfg: RunConfig, out_dir: Path, metadata: Dict[str, Any]) -> int:
        return fit_module.run_fit(cfg, out_dir, metadata, data)

    _run("fit", config, out, seed, verbose, runner)


@app.command()
def stability(
    config: Optional[Path] = ConfigOption,
    out: Path = OutOption,
    seed: Optional[int] = SeedOption,
    verbose: bool = VerboseOption,
) -> None:
    """Report equilibrium, crossing frequencies, critical delays and the stability window."""
    _run("stability", config, out, seed, verbose, stability_module.run_stability)


@app.command()
def regions(
    config: Optional[Path] = ConfigOption,
    out: Path = OutOption,
    seed: Optional[int] = SeedOption,
    verbose: bool = VerboseOption,
    max_decay: bool = typer.Option(False, "--max-decay", help="Also search the maximum decay"),
) -> None:
    """Trace sigma-stability regions of the delayed controller gains."""

    def runner(cfg: RunConfig, out_dir: Path, metadata: Dict[str, Any]) -> int:
        return regions_module.run_regions(cfg, out_dir, metadata, max_decay)

    _run("regions", config, out, seed, verbose, runner)


@app.command()
def simulate(
    config: Optional[Path] = ConfigOption,
    out: Path = OutOption,
    seed: Optional[int] = SeedOption,
    verbose: bool = VerboseOption,
) -> None:
    """Simulate the delayed model under the configured control law."""
    _run("simulate", config, out, seed, verbose, simulate_module.run_simulate)


def main() -> None:
    """Main CLI entry point."""
    app()


if __name__ == "__main__":
    main()

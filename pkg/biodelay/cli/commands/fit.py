"""
biodelay Fit Command

Identify the model constants from a batch dataset and write the fit result,
the observed-versus-simulated overlay and the fitted trajectory.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from ...config.schema import RunConfig
from ...core.export import fit_json, overlay_csv, trajectory_csv
from ...core.fitting import (
    fitted_trajectory,
    levenberg_marquardt,
    load_dataset,
    simulate_observations,
)
from ..utils.fs import write_csv_output, write_json_output

logger = logging.getLogger(__name__)

DEFAULT_DATASET = Path("data") / "zymomonas.csv"
RESULT_FILE = "fit.json"
OVERLAY_FILE = "overlay.csv"
TRAJECTORY_FILE = "fit_trajectory.csv"

EXIT_NOT_CONVERGED = 3


def resolve_dataset_path(config: RunConfig, data: Optional[Path]) -> Path:
    """--data wins over fit.data, which wins over the bundled dataset."""
    if data is not None:
        return data
    if config.fit.data:
        return Path(config.fit.data)
    return DEFAULT_DATASET


def run_fit(
    config: RunConfig, out_dir: Path, metadata: Dict[str, Any], data: Optional[Path] = None
) -> int:
    """
    Returns:
        0 when converged, 3 otherwise (outputs are written either way)

    Raises:
        IOError: If the dataset cannot be read
        DatasetError: If the dataset fails its schema checks
        ValidationError: If the fit options disagree with the bounds
    """
    path = resolve_dataset_path(config, data)
    dataset = load_dataset(path)
    spec = config.fit.to_spec(config.model.to_params())
    result = levenberg_marquardt(spec, dataset)

    s_sim, x_sim = simulate_observations(result.params, dataset, spec)
    payload = {"dataset": str(path), **fit_json(result)}
    write_json_output(out_dir, RESULT_FILE, payload, metadata)
    write_csv_output(out_dir, OVERLAY_FILE, overlay_csv(dataset, s_sim, x_sim), metadata)
    write_csv_output(
        out_dir,
        TRAJECTORY_FILE,
        trajectory_csv(fitted_trajectory(result.params, dataset, spec)),
        metadata,
    )
    if not result.converged:
        logger.warning("Fit did not converge; best-so-far result written")
        return EXIT_NOT_CONVERGED
    return 0

"""
biodelay Regions Command

Sigma-stability boundaries of the delayed controller gains, one JSON per
sigma plus a combined boundary CSV, and optionally the maximum decay rate.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List

from ...config.schema import RunConfig
from ...core.export import max_decay_json, region_csv, region_json
from ...core.model import linearize
from ...core.regions import SigmaRegion, max_decay_rate, sigma_region_boundaries
from ..utils.fs import write_csv_output, write_json_output
from .stability import resolve_operating_point

logger = logging.getLogger(__name__)

SUMMARY_FILE = "regions.json"
BOUNDARY_FILE = "boundaries.csv"


def region_file_name(sigma: float) -> str:
    return f"region_sigma_{sigma:g}.json"


def run_regions(
    config: RunConfig, out_dir: Path, metadata: Dict[str, Any], max_decay: bool = False
) -> int:
    """
    Trace every configured sigma and write the region files.

    Raises:
        NoEquilibriumError: If no operating point exists
        DegenerateError: If the controller has no authority
        EmptyRegionError: If max_decay finds no stable gains
    """
    params = config.model.to_params()
    eq, level = resolve_operating_point(params, config.stability.D, config.stability.x_target)
    lin = linearize(params, eq, level)
    options = config.regions

    regions: List[SigmaRegion] = []
    files = []
    for sigma in options.sigmas:
        region = sigma_region_boundaries(
            lin,
            sigma,
            h_range=tuple(options.h_range),
            omega_max=options.omega_max,
            n_range=tuple(options.n_range),
            omega_points=options.omega_points,
            h_points=options.h_points,
        )
        regions.append(region)
        name = region_file_name(sigma)
        write_json_output(out_dir, name, region_json(region), metadata)
        files.append(name)

    write_csv_output(out_dir, BOUNDARY_FILE, region_csv(regions), metadata)
    summary: Dict[str, Any] = {
        "equilibrium": {**eq.to_dict(), "input_level": level},
        "sigmas": list(options.sigmas),
        "files": files,
    }
    if max_decay:
        result = max_decay_rate(
            lin,
            tuple(options.h_range),
            k_range=tuple(options.k_range) if options.k_range is not None else None,
            grid=options.decay_grid,
            sigma_tol=options.sigma_tol,
            omega_cap=config.stability.omega_cap,
        )
        summary["max_decay"] = max_decay_json(result)
    write_json_output(out_dir, SUMMARY_FILE, summary, metadata)
    logger.info(f"Wrote {len(regions)} region file(s) to {out_dir}")
    return 0

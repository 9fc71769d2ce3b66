"""
biodelay Stability Command

Equilibrium, open-loop quasi-polynomial, crossing analysis and stability
window for the configured model, written as one JSON report.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ...config.schema import RunConfig
from ...core.errors import NoEquilibriumError
from ...core.model import (
    EquilibriumPoint,
    ModelParams,
    linearize,
    solve_equilibrium_closed_loop,
    solve_equilibrium_open_loop,
)
from ...core.quasipoly import open_loop_quasipolynomial
from ...core.roots import rightmost_real_part
from ...core.stability import (
    crossing_direction,
    crossing_set,
    frequency_polynomial,
    is_hurwitz_at_zero_delay,
    stability_window,
)
from ..utils.fs import write_json_output

logger = logging.getLogger(__name__)

REPORT_FILE = "stability.json"


def resolve_operating_point(
    params: ModelParams, D: float, x_target: Optional[float] = None
) -> Tuple[EquilibriumPoint, float]:
    """
    Equilibrium and input level the analysis linearizes around.

    With x_target the steady input u* holding that biomass is solved for;
    otherwise the open-loop equilibrium with the largest biomass at D is used.

    Returns:
        (equilibrium, input level)

    Raises:
        NoEquilibriumError: If no positive open-loop equilibrium exists at D
        DomainError: If x_target cannot be held
    """
    if x_target is not None:
        eq = solve_equilibrium_closed_loop(params, x_target)
        assert eq.u_star is not None
        return eq, eq.u_star
    points = solve_equilibrium_open_loop(params, D)
    if not points:
        raise NoEquilibriumError(f"no positive equilibrium for D={D}")
    return points[-1], D


def build_report(config: RunConfig) -> Dict[str, Any]:
    """
    Stability report for the configured model and operating point.

    Raises:
        NoEquilibriumError: If no positive equilibrium exists
        UnstableAtZeroDelayError: If the delay-free loop is already unstable
    """
    params = config.model.to_params()
    options = config.stability
    eq, level = resolve_operating_point(params, options.D, options.x_target)
    lin = linearize(params, eq, level)
    qp = open_loop_quasipolynomial(lin)
    kappa1, kappa2, kappa3 = qp.kappas

    crossings = crossing_set(qp, options.n_max)
    hurwitz = is_hurwitz_at_zero_delay(qp)
    window = stability_window(qp)
    rightmost = rightmost_real_part(qp, omega_cap=options.omega_cap)
    verdict = "delay_independent_stable" if window.delay_independent else "crossover_window"

    logger.info(f"Equilibrium (s*, x*) = ({eq.s_star:.6g}, {eq.x_star:.6g}), input {level:.6g}")
    return {
        "equilibrium": {**eq.to_dict(), "input_level": level},
        "kappas": [kappa1, kappa2, kappa3],
        "frequency_polynomial": frequency_polynomial(qp),
        "crossing_coefficient": kappa1 * kappa1 - 2.0 * kappa2,
        "crossing_sign": crossing_direction(qp),
        "crossings": crossings.to_dict(),
        "hurwitz_at_zero_delay": hurwitz,
        "window": window.to_dict(),
        "verdict": verdict,
        "rightmost_real_part": rightmost if math.isfinite(rightmost) else None,
        "tau": params.tau,
    }


def run_stability(config: RunConfig, out_dir: Path, metadata: Dict[str, Any]) -> int:
    report = build_report(config)
    path = write_json_output(out_dir, REPORT_FILE, report, metadata)
    upper = report["window"]["upper"]
    logger.info(f"Stability window (0, {upper}) written to {path}")
    return 0

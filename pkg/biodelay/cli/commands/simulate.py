"""
biodelay Simulate Command

Integrate the configured model under the configured control law and write
the trajectory, its phase plane and a short summary.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ...config.schema import RunConfig
from ...core.errors import DegenerateError
from ...core.export import phase_plane_csv, trajectory_csv, trajectory_json
from ...core.model import (
    EquilibriumPoint,
    ModelParams,
    solve_equilibrium_open_loop,
    solve_equilibrium_proportional,
)
from ...core.simulation import (
    ConstantControl,
    ControlLaw,
    DelayedProportionalControl,
    ProportionalControl,
    ScheduledControl,
    Trajectory,
    decay_estimate,
    simulate,
)
from ..utils.fs import write_csv_output, write_json_output

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
TRAJECTORY_JSON_FILE = "trajectory.json"
PHASE_FILE = "phase.csv"
SUMMARY_FILE = "simulation.json"


def _final_law(law: ControlLaw) -> ControlLaw:
    while isinstance(law, ScheduledControl):
        law = law.second
    return law


def target_equilibrium(
    params: ModelParams, law: ControlLaw, traj: Trajectory
) -> Optional[EquilibriumPoint]:
    """
    Equilibrium of the law in force at the end that lies closest to the final state.
    """
    final = _final_law(law)
    points: List[EquilibriumPoint]
    if isinstance(final, ConstantControl):
        points = solve_equilibrium_open_loop(params, final.D)
    elif isinstance(final, (DelayedProportionalControl, ProportionalControl)):
        points = solve_equilibrium_proportional(params, max(final.k_r, 0.0))
    else:
        points = []
    if not points:
        return None
    s_end, x_end = float(traj.s[-1]), float(traj.x[-1])
    return min(points, key=lambda p: np.hypot(p.s_star - s_end, p.x_star - x_end))


def run_simulate(config: RunConfig, out_dir: Path, metadata: Dict[str, Any]) -> int:
    """
    Raises:
        StepSizeError: If dt is too coarse for the delays
        SimulationBlowUpError: If the state stops being finite
    """
    params = config.model.to_params()
    law = config.control.to_law()
    options = config.simulation
    traj = simulate(params, law, config.history.to_history(), options.t_final, options.dt)

    write_csv_output(out_dir, TRAJECTORY_FILE, trajectory_csv(traj), metadata)
    write_csv_output(out_dir, PHASE_FILE, phase_plane_csv(traj), metadata)
    write_json_output(out_dir, TRAJECTORY_JSON_FILE, trajectory_json(traj), metadata)

    summary: Dict[str, Any] = {
        "law": law.to_dict(),
        "final_state": {"t": traj.t_final, "s": float(traj.s[-1]), "x": float(traj.x[-1])},
        "input_range": [float(traj.u.min()), float(traj.u.max())],
        "clamp_events": traj.clamp_events,
        "equilibrium": None,
        "deviation": None,
        "decay_rate": None,
    }
    eq = target_equilibrium(params, law, traj)
    if eq is not None:
        deviation = traj.deviation_norm(eq)
        summary["equilibrium"] = eq.to_dict()
        summary["deviation"] = {"initial": float(deviation[0]), "final": float(deviation[-1])}
        if options.decay_window is not None:
            try:
                summary["decay_rate"] = decay_estimate(traj, eq, tuple(options.decay_window))
            except DegenerateError as e:
                logger.warning(f"Decay rate unavailable: {e}")
    write_json_output(out_dir, SUMMARY_FILE, summary, metadata)
    logger.info(f"Simulated {len(traj.times)} samples to t={traj.t_final:g}")
    return 0

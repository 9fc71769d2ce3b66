"""
biodelay Export

Plot-ready CSV and JSON renderings of trajectories, regions, crossing sets
and fits. Floats are written in their shortest round-trip form so identical
runs produce identical bytes.
"""

import json
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from .fitting import Dataset, FitResult
from .regions import MaxDecayResult, SigmaRegion
from .simulation import Trajectory
from .stability import CrossingSet

TRAJECTORY_COLUMNS = ["time", "s", "x", "u"]
PHASE_COLUMNS = ["s", "x"]
REGION_COLUMNS = ["sigma", "type", "n", "segment", "h", "k_r"]
OVERLAY_COLUMNS = ["time", "biomass_obs", "biomass_sim", "substrate_obs", "substrate_sim"]


def dumps(data: Any) -> str:
    """Indented JSON with sorted keys; NaN and infinity are rejected."""
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    return pd.DataFrame(
        {"time": traj.times, "s": traj.s, "x": traj.x, "u": traj.u},
        columns=TRAJECTORY_COLUMNS,
    )


def trajectory_csv(traj: Trajectory) -> str:
    """One row per step with header time,s,x,u."""
    return _csv(trajectory_frame(traj))


def trajectory_json(traj: Trajectory) -> Dict[str, Any]:
    """
    Samples plus the cubic of every segment for exact replay.

    Each segment stores c0..c3 of s and x as polynomials in r = t - t0.
    """
    coefficients = traj.segment_coefficients()
    segments = [
        {
            "t0": float(traj.times[k]),
            "t1": float(traj.times[k + 1]),
            "s": coefficients["s"][k].tolist(),
            "x": coefficients["x"][k].tolist(),
        }
        for k in range(len(traj.times) - 1)
    ]
    return {
        "times": traj.times.tolist(),
        "s": traj.s.tolist(),
        "x": traj.x.tolist(),
        "u": traj.u.tolist(),
        "segments": segments,
        "clamp_events": traj.clamp_events,
    }


def phase_plane_csv(traj: Trajectory) -> str:
    """Substrate against biomass, header s,x."""
    return _csv(pd.DataFrame({"s": traj.s, "x": traj.x}, columns=PHASE_COLUMNS))


def region_json(region: SigmaRegion) -> Dict[str, Any]:
    return region.to_dict()


def region_csv(regions: Sequence[SigmaRegion]) -> str:
    """Long-format boundary points of several sigma regions."""
    frames: List[pd.DataFrame] = []
    for region in regions:
        for segment, curve in enumerate(region.curves):
            if len(curve.points) == 0:
                continue
            count = len(curve.points)
            frames.append(
                pd.DataFrame(
                    {
                        "sigma": np.full(count, region.sigma),
                        "type": [curve.kind] * count,
                        "n": ["" if curve.n is None else str(curve.n)] * count,
                        "segment": np.full(count, segment),
                        "h": curve.points[:, 0],
                        "k_r": curve.points[:, 1],
                    },
                    columns=REGION_COLUMNS,
                )
            )
    if not frames:
        return _csv(pd.DataFrame(columns=REGION_COLUMNS))
    return _csv(pd.concat(frames, ignore_index=True))


def max_decay_json(result: MaxDecayResult) -> Dict[str, Any]:
    return result.to_dict()


def crossing_json(crossings: CrossingSet) -> Dict[str, Any]:
    return crossings.to_dict()


def fit_json(result: FitResult) -> Dict[str, Any]:
    data = result.to_dict()
    data["sse_history"] = list(result.sse_history)
    return data


def overlay_csv(ds: Dataset, simulated_s: np.ndarray, simulated_x: np.ndarray) -> str:
    """Observed against simulated values at the dataset times."""
    frame = pd.DataFrame(
        {
            "time": ds.times,
            "biomass_obs": ds.biomass,
            "biomass_sim": np.asarray(simulated_x, dtype=float),
            "substrate_obs": ds.substrate,
            "substrate_sim": np.asarray(simulated_s, dtype=float),
        },
        columns=OVERLAY_COLUMNS,
    )
    return _csv(frame)

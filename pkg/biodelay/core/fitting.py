"""
biodelay Parameter Fitting

Levenberg-Marquardt identification of model constants from batch
fermentation data, and the efficiency coefficient used to judge the fit.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit, logit

from .constants import (
    DEFAULT_FIT_DT,
    ALPHA_BOUNDS,
    BETA_BOUNDS,
    DELAY_BOUNDS,
    LM_DAMPING_FACTOR,
    LM_FD_STEP,
    LM_GRADIENT_TOL,
    LM_INITIAL_DAMPING,
    LM_MAX_DAMPING,
    LM_MAX_ITERATIONS,
    LM_SSE_RTOL,
    LM_TAU_FD_STEP,
    RATE_BOUNDS,
)
from .errors import (
    DatasetError,
    DegenerateError,
    DomainError,
    SimulationBlowUpError,
    StepSizeError,
)
from .model import ZYMOMONAS_DILUTION, ModelParams
from .simulation import ConstantControl, HistorySpec, Trajectory, simulate

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ("time", "biomass", "biomass_err", "substrate", "substrate_err")
FREE_PARAMETERS = ("a", "b", "c", "d", "e", "alpha", "beta", "tau")
ERROR_BAR_FRACTION = 0.05
ERROR_BAR_FLOOR = 1e-6

Bounds = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed biomass and substrate with their error bars at sample times."""

    times: np.ndarray
    biomass: np.ndarray
    substrate: np.ndarray
    biomass_err: np.ndarray
    substrate_err: np.ndarray

    def __post_init__(self) -> None:
        for name in ("times", "biomass", "substrate", "biomass_err", "substrate_err"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        n = len(self.times)
        if any(
            len(getattr(self, name)) != n
            for name in ("biomass", "substrate", "biomass_err", "substrate_err")
        ):
            raise DatasetError("dataset columns must have equal length")
        if n < 2:
            raise DatasetError(f"dataset needs at least 2 rows, got {n}")
        for name in ("times", "biomass", "substrate", "biomass_err", "substrate_err"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DatasetError(f"column {name} has non-finite values")
        if np.any(np.diff(self.times) <= 0):
            raise DatasetError("times must be strictly increasing")
        if self.times[0] < 0:
            raise DatasetError("times must be nonnegative")
        if np.any(self.biomass < 0) or np.any(self.substrate < 0):
            raise DatasetError("concentrations must be nonnegative")
        if np.any(self.biomass_err <= 0) or np.any(self.substrate_err <= 0):
            raise DatasetError("error bars must be positive")

    def __len__(self) -> int:
        return len(self.times)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "time": self.times,
                "biomass": self.biomass,
                "biomass_err": self.biomass_err,
                "substrate": self.substrate,
                "substrate_err": self.substrate_err,
            },
            columns=list(DATASET_COLUMNS),
        )

    def initial_history(self) -> HistorySpec:
        """Constant pre-history at the first observation."""
        return HistorySpec(s_init=float(self.substrate[0]), x_init=float(self.biomass[0]))


def load_dataset(path: Union[str, Path]) -> Dataset:
    """
    Read a dataset CSV with header time,biomass,biomass_err,substrate,substrate_err.

    Raises:
        IOError: If the file cannot be read
        DatasetError: If the contents fail the schema checks
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, comment="#")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DatasetError(f"cannot parse {path}: {e}") from e
    except OSError as e:
        logger.error(f"Failed to read dataset {path}: {e}")
        raise IOError(f"Cannot read dataset {path}: {e}") from e

    if tuple(frame.columns) != DATASET_COLUMNS:
        raise DatasetError(
            f"expected header {','.join(DATASET_COLUMNS)}, got {','.join(map(str, frame.columns))}"
        )
    try:
        numeric = frame.astype(float)
    except (TypeError, ValueError) as e:
        raise DatasetError(f"non-numeric value in {path}: {e}") from e
    dataset = Dataset(
        times=numeric["time"].to_numpy(),
        biomass=numeric["biomass"].to_numpy(),
        substrate=numeric["substrate"].to_numpy(),
        biomass_err=numeric["biomass_err"].to_numpy(),
        substrate_err=numeric["substrate_err"].to_numpy(),
    )
    logger.info(f"Loaded {len(dataset)} observations from {path}")
    return dataset


def sample_trajectory(
    traj: Trajectory,
    times: np.ndarray,
    noise: float = 0.0,
    seed: Optional[int] = None,
    error_fraction: float = ERROR_BAR_FRACTION,
) -> Dataset:
    """
    Synthetic dataset from a simulated trajectory.

    Args:
        traj: Source trajectory covering every sample time
        times: Sample times
        noise: Standard deviation of the multiplicative Gaussian noise
        seed: Seed of the numpy Generator used for the noise
        error_fraction: Error bar as a fraction of each sampled value
    """
    times = np.asarray(times, dtype=float)
    s, x = traj.interpolate(times)
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if noise > 0:
        rng = np.random.default_rng(seed)
        x = x * (1.0 + noise * rng.standard_normal(len(times)))
        s = s * (1.0 + noise * rng.standard_normal(len(times)))
    x = np.maximum(x, 0.0)
    s = np.maximum(s, 0.0)
    return Dataset(
        times=times,
        biomass=x,
        substrate=s,
        biomass_err=np.maximum(error_fraction * x, ERROR_BAR_FLOOR),
        substrate_err=np.maximum(error_fraction * s, ERROR_BAR_FLOOR),
    )


def default_bounds(name: str) -> Bounds:
    """Search interval of a free parameter: rates, exponents or the delay."""
    if name == "tau":
        return DELAY_BOUNDS
    if name == "alpha":
        return ALPHA_BOUNDS
    if name == "beta":
        return BETA_BOUNDS
    if name in ("a", "b", "c", "d", "e"):
        return RATE_BOUNDS
    raise DomainError("free_parameter", f"{name!r} cannot be fitted")


@dataclass(frozen=True)
class FitSpec:
    """
    What to fit and what to hold fixed.

    Attributes:
        free: Names of the fitted parameters, a subset of FREE_PARAMETERS
        initial: Starting point; also supplies every fixed constant
        bounds: Open search interval per free parameter (defaults per kind)
        dilution: Constant input D during the batch
        history: Pre-history; None uses the first observation
        weighted: Divide residuals by the error bars
        dt: Largest integration step; see step
        max_iter: Iteration cap
    """

    free: Tuple[str, ...]
    initial: ModelParams
    bounds: Mapping[str, Bounds] = field(default_factory=dict)
    dilution: float = ZYMOMONAS_DILUTION
    history: Optional[HistorySpec] = None
    weighted: bool = False
    dt: float = DEFAULT_FIT_DT
    max_iter: int = LM_MAX_ITERATIONS

    def __post_init__(self) -> None:
        free = tuple(self.free)
        object.__setattr__(self, "free", free)
        if len(set(free)) != len(free):
            raise DomainError("free_unique", f"duplicate free parameters in {free}")
        resolved: Dict[str, Bounds] = {}
        for name in free:
            lower, upper = self.bounds.get(name, default_bounds(name))
            if not (math.isfinite(lower) and math.isfinite(upper) and lower < upper):
                raise DomainError("bounds", f"{name}: invalid bounds ({lower}, {upper})")
            value = getattr(self.initial, name)
            if not lower < value < upper:
                raise DomainError(
                    "initial_in_bounds", f"{name}={value} not inside ({lower}, {upper})"
                )
            resolved[name] = (float(lower), float(upper))
        if "tau" in resolved and not resolved["tau"][0] > 0:
            raise DomainError(
                "tau_lower_positive", f"tau lower bound {resolved['tau'][0]} must be positive"
            )
        extra = set(self.bounds) - set(free)
        if extra:
            raise DomainError("bounds", f"bounds given for fixed parameters {sorted(extra)}")
        object.__setattr__(self, "bounds", resolved)
        if not 0.0 <= self.dilution <= 1.0:
            raise DomainError("D_range", f"D={self.dilution} must lie in [0, 1]")
        if not self.dt > 0:
            raise DomainError("dt_positive", f"dt={self.dt} must be positive")
        if self.max_iter < 0:
            raise DomainError("max_iter", f"max_iter={self.max_iter} must be >= 0")

    def encode(self, params: ModelParams) -> np.ndarray:
        """Unconstrained coordinates z with p = lower + (upper - lower) expit(z)."""
        z = []
        for name in self.free:
            lower, upper = self.bounds[name]
            z.append(logit((getattr(params, name) - lower) / (upper - lower)))
        return np.array(z, dtype=float)

    def decode(self, z: np.ndarray) -> ModelParams:
        changes = {}
        for name, value in zip(self.free, z):
            lower, upper = self.bounds[name]
            changes[name] = float(lower + (upper - lower) * expit(value))
        return self.initial.with_updates(**changes)

    def decode_slopes(self, z: np.ndarray) -> np.ndarray:
        """dp/dz for every free parameter."""
        spans = np.array([self.bounds[name][1] - self.bounds[name][0] for name in self.free])
        sig = expit(z)
        return spans * sig * (1.0 - sig)

    @property
    def step(self) -> float:
        """
        Integration step shared by every simulation of the fit.

        It is fixed once from the smallest admissible delay, so the objective
        is evaluated on the same grid wherever tau moves inside its bounds.
        """
        if "tau" in self.bounds:
            return min(self.dt, self.bounds["tau"][0] / 4.0)
        if self.initial.tau > 0:
            return min(self.dt, self.initial.tau / 4.0)
        return self.dt


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    sse: float
    eps1_biomass: float
    eps1_substrate: float
    iterations: int
    converged: bool
    sse_history: Tuple[float, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "sse": self.sse,
            "eps1_biomass": self.eps1_biomass,
            "eps1_substrate": self.eps1_substrate,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def efficiency_coefficient(simulated: np.ndarray, observed: np.ndarray) -> float:
    """
    eps1 = 1 - sum|Y - Y*| / sum|Y* - mean(Y*)|, at most 1.

    Raises:
        DomainError: If the lengths differ or fewer than 2 values are given
        DegenerateError: If the observed values are all equal
    """
    simulated = np.asarray(simulated, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if simulated.shape != observed.shape or observed.size < 2:
        raise DomainError("lengths", "need two equal-length series with >= 2 values")
    spread = float(np.sum(np.abs(observed - observed.mean())))
    if spread == 0.0:
        raise DegenerateError("observed values are all equal")
    return 1.0 - float(np.sum(np.abs(simulated - observed))) / spread


def fitted_trajectory(params: ModelParams, ds: Dataset, spec: FitSpec) -> Trajectory:
    """Batch simulation under the FitSpec's fixed dilution and history, up to the last sample."""
    return simulate(
        params,
        ConstantControl(spec.dilution),
        spec.history or ds.initial_history(),
        t_f=float(ds.times[-1]),
        dt=spec.step,
    )


def simulate_observations(
    params: ModelParams, ds: Dataset, spec: FitSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """Simulated (substrate, biomass) at the dataset times."""
    s, x = fitted_trajectory(params, ds, spec).interpolate(ds.times)
    return np.asarray(s, dtype=float), np.asarray(x, dtype=float)


def residuals(params: ModelParams, ds: Dataset, spec: FitSpec) -> np.ndarray:
    """
    Stacked biomass then substrate residuals, simulated minus observed.

    Weighted residuals are divided by the per-point error bars. A simulation
    that blows up yields a vector of +inf.
    """
    try:
        s, x = simulate_observations(params, ds, spec)
    except (SimulationBlowUpError, StepSizeError) as e:
        logger.debug(f"Simulation failed for {params}: {e}")
        return np.full(2 * len(ds), np.inf)
    r_x = x - ds.biomass
    r_s = s - ds.substrate
    if spec.weighted:
        r_x = r_x / ds.biomass_err
        r_s = r_s / ds.substrate_err
    r = np.concatenate([r_x, r_s])
    if not np.all(np.isfinite(r)):
        return np.full(2 * len(ds), np.inf)
    return r


def _sse(r: np.ndarray) -> float:
    return float(r @ r) if np.all(np.isfinite(r)) else math.inf


def _jacobian(
    z: np.ndarray, r: np.ndarray, ds: Dataset, spec: FitSpec
) -> np.ndarray:
    """Forward-difference Jacobian dr/dz through the logistic map."""
    params = spec.decode(z)
    columns = []
    for i, name in enumerate(spec.free):
        value = getattr(params, name)
        lower, upper = spec.bounds[name]
        if name == "tau":
            step = LM_TAU_FD_STEP * max(value, 1.0)
        else:
            step = LM_FD_STEP * max(abs(value), 1.0)
        if value + step >= upper:
            step = -step
        shifted = residuals(params.with_updates(**{name: value + step}), ds, spec)
        if not np.all(np.isfinite(shifted)):
            columns.append(np.zeros_like(r))
            continue
        columns.append((shifted - r) / step)
    J = np.column_stack(columns)
    return J * spec.decode_slopes(z)[None, :]


def _fit_result(
    params: ModelParams,
    sse: float,
    ds: Dataset,
    spec: FitSpec,
    iterations: int,
    converged: bool,
    history: List[float],
) -> FitResult:
    s, x = simulate_observations(params, ds, spec)
    return FitResult(
        params=params,
        sse=sse,
        eps1_biomass=efficiency_coefficient(x, ds.biomass),
        eps1_substrate=efficiency_coefficient(s, ds.substrate),
        iterations=iterations,
        converged=converged,
        sse_history=tuple(history),
    )


def levenberg_marquardt(spec: FitSpec, ds: Dataset) -> FitResult:
    """
    Damped Gauss-Newton fit of the free parameters to a dataset.

    Steps solve (J^T J + lambda diag(J^T J)) dz = -J^T r in the logistic
    coordinates, so every iterate stays strictly inside its bounds. The
    damping starts at 1e-3, is multiplied by 10 after a rejected step and
    divided by 10 after an accepted one.

    Stops when the relative SSE decrease falls below 1e-10, the gradient
    norm below 1e-8, when no damping up to 1e12 yields a decrease, or after
    max_iter iterations (converged=False).

    Raises:
        DegenerateError: If the initial parameters cannot be simulated
    """
    z = spec.encode(spec.initial)
    params = spec.initial
    r = residuals(params, ds, spec)
    sse = _sse(r)
    if not math.isfinite(sse):
        raise DegenerateError("initial parameters do not produce a finite simulation")
    history = [sse]
    if not spec.free:
        logger.info("No free parameters; returning the initial guess")
        return _fit_result(params, sse, ds, spec, 0, True, history)

    damping = LM_INITIAL_DAMPING
    converged = False
    iterations = 0
    while iterations < spec.max_iter:
        iterations += 1
        J = _jacobian(z, r, ds, spec)
        gradient = J.T @ r
        if float(np.linalg.norm(gradient)) < LM_GRADIENT_TOL:
            logger.info(f"Gradient norm below tolerance at iteration {iterations}")
            converged = True
            break
        normal = J.T @ J
        scale = np.maximum(np.diag(normal), 1e-12)

        accepted = False
        while damping <= LM_MAX_DAMPING:
            try:
                step = np.linalg.solve(normal + damping * np.diag(scale), -gradient)
            except np.linalg.LinAlgError:
                damping *= LM_DAMPING_FACTOR
                continue
            z_trial = z + step
            try:
                trial = spec.decode(z_trial)
            except DomainError:
                damping *= LM_DAMPING_FACTOR
                continue
            r_trial = residuals(trial, ds, spec)
            sse_trial = _sse(r_trial)
            if sse_trial < sse:
                accepted = True
                break
            damping *= LM_DAMPING_FACTOR
            logger.debug(f"Rejected step, damping -> {damping:.1e}")

        if not accepted:
            logger.info(f"No descent direction at iteration {iterations}; stopping")
            converged = True
            break

        decrease = (sse - sse_trial) / max(sse, 1e-300)
        z, params, r, sse = z_trial, trial, r_trial, sse_trial
        history.append(sse)
        damping = max(damping / LM_DAMPING_FACTOR, 1e-300)
        logger.debug(f"Iteration {iterations}: SSE={sse:.6g}, damping={damping:.1e}")
        if decrease < LM_SSE_RTOL:
            converged = True
            break

    if not converged:
        logger.warning(f"Levenberg-Marquardt did not converge in {spec.max_iter} iterations")
    result = _fit_result(params, sse, ds, spec, iterations, converged, history)
    logger.info(
        f"Fit finished: SSE={sse:.6g}, eps1 biomass={result.eps1_biomass:.3f}, "
        f"substrate={result.eps1_substrate:.3f}"
    )
    return result

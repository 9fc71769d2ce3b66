"""
biodelay Simulation

Fixed-step integration of the delayed bioreactor model by the method of
steps, with cubic Hermite dense output for the delayed lookups.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, ClassVar, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.signal import find_peaks

from .constants import DEFAULT_DT, DEFAULT_NOISE_FLOOR
from .errors import DegenerateError, DomainError, SimulationBlowUpError, StepSizeError
from .model import EquilibriumPoint, ModelParams

logger = logging.getLogger(__name__)

History = Callable[[float], float]
ArrayLike = Union[float, np.ndarray]

MAX_LAW_DEPTH = 2


class ControlLaw(ABC):
    """Input policy u(t); raw values are clamped to [0, 1] by the integrator."""

    kind: ClassVar[str] = ""

    @abstractmethod
    def level(self, t: float, x_now: float, history: History) -> float:
        """Unclamped input at time t given the current biomass and its past."""

    @property
    def delays(self) -> Tuple[float, ...]:
        return ()

    @property
    def depth(self) -> int:
        return 1

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        pass

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> "ControlLaw":
        """
        Rebuild a law from its to_dict form.

        Raises:
            DomainError: On an unknown type or bad fields
        """
        kind = data.get("type")
        try:
            if kind == ConstantControl.kind:
                return ConstantControl(D=float(data["D"]))
            if kind == DelayedProportionalControl.kind:
                return DelayedProportionalControl(k_r=float(data["k_r"]), h=float(data["h"]))
            if kind == ProportionalControl.kind:
                return ProportionalControl(k_r=float(data["k_r"]))
            if kind == ScheduledControl.kind:
                return ScheduledControl(
                    first=ControlLaw.from_dict(data["first"]),
                    second=ControlLaw.from_dict(data["second"]),
                    switch_time=float(data["switch_time"]),
                )
        except KeyError as e:
            raise DomainError("control_fields", f"missing field {e} for {kind}") from e
        raise DomainError("control_type", f"unknown control law type {kind!r}")


@dataclass(frozen=True)
class ConstantControl(ControlLaw):
    """Constant dilution u(t) = D."""

    kind: ClassVar[str] = "constant"
    D: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.D <= 1.0:
            raise DomainError("D_range", f"D={self.D} must lie in [0, 1]")

    def level(self, t: float, x_now: float, history: History) -> float:
        return self.D

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind, "D": self.D}


@dataclass(frozen=True)
class DelayedProportionalControl(ControlLaw):
    """u(t) = k_r x(t - h); with h = 0 the current biomass is used."""

    kind: ClassVar[str] = "delayed_proportional"
    k_r: float
    h: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.k_r):
            raise DomainError("k_r_finite", f"k_r={self.k_r} must be finite")
        if not (math.isfinite(self.h) and self.h >= 0):
            raise DomainError("h_nonnegative", f"h={self.h} must be nonnegative")

    def level(self, t: float, x_now: float, history: History) -> float:
        if self.h == 0.0:
            return self.k_r * x_now
        return self.k_r * history(t - self.h)

    @property
    def delays(self) -> Tuple[float, ...]:
        return (self.h,)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind, "k_r": self.k_r, "h": self.h}


@dataclass(frozen=True)
class ProportionalControl(ControlLaw):
    """Undelayed u(t) = k_r x(t)."""

    kind: ClassVar[str] = "proportional"
    k_r: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.k_r):
            raise DomainError("k_r_finite", f"k_r={self.k_r} must be finite")

    def level(self, t: float, x_now: float, history: History) -> float:
        return self.k_r * x_now

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind, "k_r": self.k_r}


@dataclass(frozen=True)
class ScheduledControl(ControlLaw):
    """first for t < switch_time, second afterwards."""

    kind: ClassVar[str] = "scheduled"
    first: ControlLaw
    second: ControlLaw
    switch_time: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.switch_time) and self.switch_time > 0):
            raise DomainError("switch_positive", f"T={self.switch_time} must be positive")
        if self.depth > MAX_LAW_DEPTH:
            raise DomainError(
                "nesting_depth", f"scheduled laws nest at most {MAX_LAW_DEPTH} levels"
            )

    def level(self, t: float, x_now: float, history: History) -> float:
        law = self.first if t < self.switch_time else self.second
        return law.level(t, x_now, history)

    @property
    def delays(self) -> Tuple[float, ...]:
        return self.first.delays + self.second.delays

    @property
    def depth(self) -> int:
        return 1 + max(self.first.depth, self.second.depth)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.kind,
            "first": self.first.to_dict(),
            "second": self.second.to_dict(),
            "switch_time": self.switch_time,
        }


@dataclass(frozen=True)
class HistorySpec:
    """Constant pre-history (s_init, x_init) on [-max_delay, 0]."""

    s_init: float
    x_init: float

    def __post_init__(self) -> None:
        for name in ("s_init", "x_init"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name}_nonnegative", f"{name}={value} must be >= 0")

    def to_dict(self) -> Dict[str, float]:
        return {"s_init": self.s_init, "x_init": self.x_init}


def _hermite(
    theta: ArrayLike, y0: ArrayLike, y1: ArrayLike, m0: ArrayLike, m1: ArrayLike, h: ArrayLike
) -> ArrayLike:
    """Cubic Hermite on one segment; theta in [0, 1], slopes scaled by h."""
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + theta) * h * m0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * m1
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Sampled solution with node derivatives for dense evaluation.

    Attributes:
        times: Strictly increasing sample times
        s, x: State samples
        u: Clamped input at each sample
        ds, dx: Right-hand side at each sample (Hermite slopes)
        control_clamps: Samples where the raw input left [0, 1]
        state_clamps: Steps whose new state was clamped at zero
    """

    times: np.ndarray
    s: np.ndarray
    x: np.ndarray
    u: np.ndarray
    ds: np.ndarray
    dx: np.ndarray
    control_clamps: int = 0
    state_clamps: int = 0

    def __post_init__(self) -> None:
        for name in ("times", "s", "x", "u", "ds", "dx"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        n = len(self.times)
        if any(len(getattr(self, name)) != n for name in ("s", "x", "u", "ds", "dx")):
            raise DomainError("lengths", "trajectory arrays must have equal length")
        if n < 2 or np.any(np.diff(self.times) <= 0):
            raise DomainError("times", "times must be strictly increasing with >= 2 samples")

    @classmethod
    def from_samples(
        cls,
        times: np.ndarray,
        s: np.ndarray,
        x: np.ndarray,
        u: Optional[np.ndarray] = None,
    ) -> "Trajectory":
        """Trajectory from explicit samples; slopes are estimated with np.gradient."""
        times = np.asarray(times, dtype=float)
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        if u is None:
            u = np.zeros_like(times)
        return cls(
            times=times,
            s=s,
            x=x,
            u=np.asarray(u, dtype=float),
            ds=np.gradient(s, times),
            dx=np.gradient(x, times),
        )

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def clamp_events(self) -> Dict[str, int]:
        return {"control": self.control_clamps, "state": self.state_clamps}

    def interpolate(self, t: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """
        (s(t), x(t)) from the Hermite segments; t must lie in the span.

        Raises:
            DomainError: If any t is outside [times[0], times[-1]]
        """
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.times[0]) or np.any(t_arr > self.times[-1]):
            raise DomainError("time_span", f"t outside [{self.times[0]}, {self.times[-1]}]")
        k = np.clip(np.searchsorted(self.times, t_arr, side="right") - 1, 0, len(self.times) - 2)
        h = self.times[k + 1] - self.times[k]
        theta = (t_arr - self.times[k]) / h
        s = _hermite(theta, self.s[k], self.s[k + 1], self.ds[k], self.ds[k + 1], h)
        x = _hermite(theta, self.x[k], self.x[k + 1], self.dx[k], self.dx[k + 1], h)
        if np.ndim(t) == 0:
            return float(s), float(x)
        return s, x

    def deviation_norm(self, eq: EquilibriumPoint) -> np.ndarray:
        """Euclidean distance of every sample from (s*, x*)."""
        return np.hypot(self.s - eq.s_star, self.x - eq.x_star)

    def segment_coefficients(self) -> Dict[str, np.ndarray]:
        """
        Power-basis cubic per segment in the local time r = t - times[k].

        Returns:
            {"s": (N-1, 4), "x": (N-1, 4)} with columns c0..c3
        """
        h = np.diff(self.times)
        result = {}
        for name, y, m in (("s", self.s, self.ds), ("x", self.x, self.dx)):
            y0, y1, m0, m1 = y[:-1], y[1:], m[:-1], m[1:]
            slope = (y1 - y0) / h
            c2 = (3.0 * slope - 2.0 * m0 - m1) / h
            c3 = (m0 + m1 - 2.0 * slope) / (h * h)
            result[name] = np.column_stack([y0, m0, c2, c3])
        return result


def _check_step(params: ModelParams, law: ControlLaw, t_f: float, dt: float) -> None:
    if not (math.isfinite(t_f) and t_f > 0):
        raise DomainError("t_final_positive", f"t_f={t_f} must be positive")
    if not (math.isfinite(dt) and dt > 0):
        raise StepSizeError(f"dt={dt} must be positive")
    positive = [d for d in (params.tau,) + law.delays if d > 0]
    if positive and dt > min(positive) / 4.0 * (1.0 + 1e-12):
        raise StepSizeError(
            f"dt={dt} exceeds min(delay)/4={min(positive) / 4.0:.6g}"
        )


def simulate(
    params: ModelParams,
    law: ControlLaw,
    hist: HistorySpec,
    t_f: float,
    dt: float = DEFAULT_DT,
) -> Trajectory:
    """
    Integrate the delayed model with classical RK4 on a uniform grid.

    Delayed biomass values are read from the Hermite interpolant of completed
    steps (the constant pre-history before t = 0). The input is clamped to
    [0, 1] and the state at zero after every step.

    Args:
        params: Model constants; params.tau is the state delay
        law: Input policy
        hist: Constant pre-history and initial state
        t_f: Final time; the grid is k*dt up to the first node >= t_f
        dt: Step size, at most min(positive delays)/4

    Returns:
        Trajectory sampled at every step

    Raises:
        StepSizeError: If dt is nonpositive or too coarse for the delays
        SimulationBlowUpError: If the state stops being finite
    """
    _check_step(params, law, t_f, dt)
    n_steps = max(1, int(math.ceil(t_f / dt - 1e-9)))
    tau = params.tau
    x0 = hist.x_init

    S: List[float] = [hist.s_init]
    X: List[float] = [hist.x_init]
    FS: List[float] = []
    FX: List[float] = []

    def history(t: float) -> float:
        if t <= 0.0:
            return x0
        k = min(int(t / dt), len(FX) - 2)
        theta = t / dt - k
        return float(_hermite(theta, X[k], X[k + 1], FX[k], FX[k + 1], dt))

    control_clamps = 0

    def rhs(t: float, s: float, x: float) -> Tuple[float, float, float, bool]:
        x_delayed = x if tau == 0.0 else history(t - tau)
        raw = law.level(t, x, history)
        u = min(max(raw, 0.0), 1.0)
        ds, dx = params.vector_field(s, x, x_delayed, u)
        return ds, dx, u, u != raw

    U: List[float] = []
    state_clamps = 0
    logger.info(
        f"Simulating to t={n_steps * dt:g} with dt={dt:g} ({n_steps} steps), "
        f"law={law.kind}, tau={tau:g}"
    )
    try:
        for k in range(n_steps):
            t = k * dt
            s, x = S[k], X[k]
            k1s, k1x, u, clamped = rhs(t, s, x)
            FS.append(k1s)
            FX.append(k1x)
            U.append(u)
            control_clamps += clamped
            k2s, k2x, _, _ = rhs(t + 0.5 * dt, s + 0.5 * dt * k1s, x + 0.5 * dt * k1x)
            k3s, k3x, _, _ = rhs(t + 0.5 * dt, s + 0.5 * dt * k2s, x + 0.5 * dt * k2x)
            k4s, k4x, _, _ = rhs(t + dt, s + dt * k3s, x + dt * k3x)
            s_new = s + dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
            x_new = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            if not (math.isfinite(s_new) and math.isfinite(x_new)):
                raise SimulationBlowUpError(t, f"s={s_new}, x={x_new}")
            if s_new < 0.0 or x_new < 0.0:
                state_clamps += 1
                logger.debug(f"State clamped at t={t + dt:g}: s={s_new:.3e}, x={x_new:.3e}")
                s_new, x_new = max(s_new, 0.0), max(x_new, 0.0)
            S.append(s_new)
            X.append(x_new)
        ds_end, dx_end, u_end, clamped = rhs(n_steps * dt, S[-1], X[-1])
    except (OverflowError, ZeroDivisionError) as e:
        raise SimulationBlowUpError((len(S) - 1) * dt, str(e)) from e
    FS.append(ds_end)
    FX.append(dx_end)
    U.append(u_end)
    control_clamps += clamped

    if control_clamps or state_clamps:
        logger.warning(
            f"Clamp events: {control_clamps} control, {state_clamps} state"
        )
    return Trajectory(
        times=np.arange(n_steps + 1) * dt,
        s=np.array(S),
        x=np.array(X),
        u=np.array(U),
        ds=np.array(FS),
        dx=np.array(FX),
        control_clamps=control_clamps,
        state_clamps=state_clamps,
    )


def decay_estimate(
    traj: Trajectory,
    eq: EquilibriumPoint,
    window: Tuple[float, float],
    noise_floor: float = DEFAULT_NOISE_FLOOR,
) -> float:
    """
    Exponential decay rate of the deviation from eq over a time window.

    The log of the deviation norm at its local maxima is fitted by least
    squares and the negated slope is returned. When the deviation decays
    without oscillating (no local maxima at all), every sample above the
    noise floor is its own envelope point.

    Args:
        traj: Simulated trajectory
        eq: Equilibrium the trajectory approaches
        window: (t0, t1) inside the trajectory span
        noise_floor: Deviations at or below this are ignored

    Returns:
        Decay rate in 1/h (negative for growing deviations)

    Raises:
        DomainError: If the window is empty or outside the span
        DegenerateError: If fewer than 3 envelope points remain
    """
    t0, t1 = window
    if not (traj.times[0] <= t0 < t1 <= traj.times[-1]):
        raise DomainError(
            "window", f"{window} not inside [{traj.times[0]}, {traj.times[-1]}]"
        )
    inside = (traj.times >= t0) & (traj.times <= t1)
    times = traj.times[inside]
    deviation = traj.deviation_norm(eq)[inside]

    peaks, _ = find_peaks(deviation)
    peaks = peaks[deviation[peaks] > noise_floor]
    if len(peaks) >= 3:
        envelope_t, envelope_v = times[peaks], deviation[peaks]
    elif len(peaks) == 0 and deviation[-1] < deviation[0]:
        above = deviation > noise_floor
        envelope_t, envelope_v = times[above], deviation[above]
    else:
        envelope_t = envelope_v = np.empty(0)
    if len(envelope_t) < 3:
        raise DegenerateError(
            f"only {len(envelope_t)} envelope points above {noise_floor:g} in {window}"
        )
    slope, _ = np.polyfit(envelope_t, np.log(envelope_v), 1)
    logger.debug(f"Decay fit over {len(envelope_t)} points: rate={-slope:.5g}")
    return float(-slope)

"""
biodelay Model

Delayed fractional Lotka-Volterra bioreactor: parameters, equilibria and
linearization around an operating point.

    ds/dt = -a s^beta - b s^beta x(t - tau)^alpha + (s0 - s) u
    dx/dt =  c s^beta x^alpha - d x^alpha + e x
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .constants import (
    ADMISSIBILITY_TOL,
    DEFAULT_GRID_POINTS,
    EQUILIBRIUM_X_MAX,
    EQUILIBRIUM_X_MIN,
    EQUILIBRIUM_XTOL,
)
from .errors import DomainError

logger = logging.getLogger(__name__)

PARAM_NAMES: Tuple[str, ...] = ("a", "b", "c", "d", "e", "alpha", "beta", "s0", "tau")


def _pos_pow(value: float, exponent: float) -> float:
    """Fractional power with the base clamped at zero."""
    return max(value, 0.0) ** exponent


@dataclass(frozen=True)
class ModelParams:
    """
    The nine constants of the bioreactor model.

    Rates a..e are in 1/h, s0 in g/L and tau in h. The exponents alpha and
    beta are dimensionless. Instances are immutable; use with_updates to
    derive a modified copy.
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    alpha: float
    beta: float
    s0: float
    tau: float = 0.0

    def __post_init__(self) -> None:
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise DomainError(name, f"must be a finite number, got {value!r}")
        for name in ("a", "b", "c", "d", "e", "s0", "alpha", "beta"):
            if getattr(self, name) <= 0:
                raise DomainError(name, f"must be positive, got {getattr(self, name)}")
        if self.tau < 0:
            raise DomainError("tau", f"must be nonnegative, got {self.tau}")
        if self.beta_flag:
            logger.warning(f"beta={self.beta} is not below 1; accepted but flagged")

    @property
    def beta_flag(self) -> bool:
        """True when beta >= 1, outside the range observed for the fitted process."""
        return self.beta >= 1.0

    def with_updates(self, **changes: float) -> "ModelParams":
        unknown = set(changes) - set(PARAM_NAMES)
        if unknown:
            raise DomainError("keys", f"unknown parameter(s): {sorted(unknown)}")
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, float]:
        return {name: float(value) for name, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelParams":
        """
        Build parameters from a mapping with exactly the nine field names.

        Raises:
            DomainError: If keys are missing, unknown, or values are invalid
        """
        keys = set(data)
        expected = set(PARAM_NAMES)
        if keys != expected:
            missing = sorted(expected - keys)
            unknown = sorted(keys - expected)
            raise DomainError("keys", f"missing={missing} unknown={unknown}")
        return cls(**{name: float(data[name]) for name in PARAM_NAMES})

    def vector_field(
        self, s: float, x: float, x_delayed: float, u: float
    ) -> Tuple[float, float]:
        """
        Right-hand side of the delayed model.

        Fractional powers are evaluated at max(0, value) so states clamped at
        zero stay on the real branch.

        Args:
            s: Substrate concentration at t
            x: Biomass concentration at t
            x_delayed: Biomass concentration at t - tau
            u: Normalized inflow (dilution) at t

        Returns:
            Tuple (ds/dt, dx/dt)
        """
        s_beta = _pos_pow(s, self.beta)
        x_alpha = _pos_pow(x, self.alpha)
        ds = (
            -self.a * s_beta
            - self.b * s_beta * _pos_pow(x_delayed, self.alpha)
            + (self.s0 - s) * u
        )
        dx = self.c * s_beta * x_alpha - self.d * x_alpha + self.e * x
        return ds, dx


# Fitted constants for the Zymomonas mobilis fermentation at D = 0.15 1/h
ZYMOMONAS_PARAMS = ModelParams(
    a=0.16, b=0.11, c=0.282, d=0.47, e=0.212, alpha=1.3, beta=0.27, s0=10.0, tau=1.8
)
ZYMOMONAS_DILUTION = 0.15


@dataclass(frozen=True)
class EquilibriumPoint:
    """Positive operating point (s*, x*) and, in closed loop, its input u*."""

    s_star: float
    x_star: float
    u_star: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.s_star > 0:
            raise DomainError("s_star_positive", f"s*={self.s_star} must be positive")
        if not self.x_star > 0:
            raise DomainError("x_star_positive", f"x*={self.x_star} must be positive")
        if self.u_star is not None and not 0.0 <= self.u_star <= 1.0:
            raise DomainError("input_range", f"u*={self.u_star} must lie in [0, 1]")

    def max_derivative(self, params: ModelParams, input_level: float) -> float:
        """Largest |ds/dt|, |dx/dt| of the undelayed field at this point."""
        ds, dx = params.vector_field(self.s_star, self.x_star, self.x_star, input_level)
        return max(abs(ds), abs(dx))

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {"s_star": self.s_star, "x_star": self.x_star, "u_star": self.u_star}


@dataclass(frozen=True, eq=False)
class LinearizedModel:
    """
    Linearization z' = A0 z(t) + A1 z(t - tau) + B u(t) around an equilibrium.

    A1 couples only the delayed biomass into the substrate equation and B
    acts only on the substrate, so both are stored as full arrays with a
    single nonzero slot.
    """

    A0: np.ndarray
    A1: np.ndarray
    B: np.ndarray
    state_delay: float
    equilibrium: EquilibriumPoint
    input_level: float = field(default=0.0)

    def __post_init__(self) -> None:
        for name in ("A0", "A1", "B"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.A0.shape != (2, 2) or self.A1.shape != (2, 2) or self.B.shape != (2,):
            raise DomainError("shape", "A0, A1 must be 2x2 and B a 2-vector")
        a1_mask = np.ones((2, 2), dtype=bool)
        a1_mask[0, 1] = False
        if np.any(self.A1[a1_mask] != 0.0):
            raise DomainError("A1_structure", "A1 may only couple x(t-tau) into ds/dt")
        if self.B[1] != 0.0:
            raise DomainError("B_structure", "control acts only on the substrate")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A0": self.A0.tolist(),
            "A1": self.A1.tolist(),
            "B": self.B.tolist(),
            "state_delay": self.state_delay,
            "input_level": self.input_level,
            "equilibrium": self.equilibrium.to_dict(),
        }


def _growth_balance(x: float, params: ModelParams) -> float:
    """d - e x^(1-alpha); positive exactly where a positive s* exists."""
    return params.d - params.e * x ** (1.0 - params.alpha)


def equilibrium_substrate(params: ModelParams, x: float) -> float:
    """
    Substrate level s* = ((d - e x^(1-alpha)) / c)^(1/beta) paired with biomass x.

    Raises:
        DomainError: If x <= 0 or the growth balance is not positive
    """
    if not x > 0:
        raise DomainError("x_positive", f"x={x} must be positive")
    balance = _growth_balance(x, params)
    if balance <= 0:
        raise DomainError(
            "admissibility", f"d - e*x^(1-alpha) = {balance:.6g} <= 0 at x={x}"
        )
    return float((balance / params.c) ** (1.0 / params.beta))


def equilibrium_residual(x: float, params: ModelParams, D: float) -> float:
    """
    Residual of the steady-state substrate balance at biomass x.

    Zero exactly when (s*(x), x) is an equilibrium under constant input D:
    (a + b x^alpha) (d - e x^(1-alpha)) / c + D (s*(x) - s0).

    At the admissibility edge, where the growth balance vanishes, the
    residual takes its limit value -D*s0.

    Raises:
        DomainError: If x <= 0 or the growth balance is negative
    """
    if not x > 0:
        raise DomainError("x_positive", f"x={x} must be positive")
    balance = _growth_balance(x, params)
    if balance < -ADMISSIBILITY_TOL * params.d:
        raise DomainError(
            "admissibility", f"d - e*x^(1-alpha) = {balance:.6g} < 0 at x={x}"
        )
    ratio = max(balance, 0.0) / params.c
    uptake = (params.a + params.b * x**params.alpha) * ratio
    return float(uptake + D * (ratio ** (1.0 / params.beta) - params.s0))


def admissible_interval(params: ModelParams) -> Optional[Tuple[float, float]]:
    """
    Biomass interval on which d - e x^(1-alpha) > 0, clipped to the search box.

    Returns:
        (low, high) or None when no biomass level admits a positive s*
    """
    exponent = 1.0 - params.alpha
    if exponent == 0.0:
        if params.d > params.e:
            return EQUILIBRIUM_X_MIN, EQUILIBRIUM_X_MAX
        return None

    edge = (params.d / params.e) ** (1.0 / exponent)
    if exponent < 0:
        # x^(1-alpha) decreases: admissible above the edge
        low, high = max(edge * (1.0 + 1e-10), EQUILIBRIUM_X_MIN), EQUILIBRIUM_X_MAX
    else:
        low, high = EQUILIBRIUM_X_MIN, min(edge * (1.0 - 1e-10), EQUILIBRIUM_X_MAX)
    if low >= high:
        return None
    return low, high


def _residual_on_grid(xs: np.ndarray, params: ModelParams, D: np.ndarray) -> np.ndarray:
    balance = params.d - params.e * xs ** (1.0 - params.alpha)
    with np.errstate(invalid="ignore"):
        ratio = np.where(balance > 0, balance / params.c, np.nan)
        return (params.a + params.b * xs**params.alpha) * ratio + D * (
            ratio ** (1.0 / params.beta) - params.s0
        )


def _bracket_roots(
    params: ModelParams, input_of_x: float, proportional: bool, grid_points: int
) -> List[float]:
    """Sign-change bracketing on a log grid followed by brentq polishing."""
    interval = admissible_interval(params)
    if interval is None:
        return []
    xs = np.geomspace(interval[0], interval[1], grid_points)
    inputs = input_of_x * xs if proportional else np.full_like(xs, input_of_x)
    values = _residual_on_grid(xs, params, inputs)

    def residual(x: float) -> float:
        level = input_of_x * x if proportional else input_of_x
        return equilibrium_residual(x, params, level)

    roots: List[float] = []
    for i in range(len(xs) - 1):
        left, right = values[i], values[i + 1]
        if not (np.isfinite(left) and np.isfinite(right)):
            continue
        if left == 0.0:
            roots.append(float(xs[i]))
        elif left * right < 0:
            roots.append(
                float(brentq(residual, xs[i], xs[i + 1], xtol=EQUILIBRIUM_XTOL))
            )
    if np.isfinite(values[-1]) and values[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def _points_from_roots(
    params: ModelParams, roots: List[float], inputs: Optional[List[float]] = None
) -> List[EquilibriumPoint]:
    points: List[EquilibriumPoint] = []
    for i, x in enumerate(roots):
        balance = _growth_balance(x, params)
        if balance <= 0:
            continue
        s = (balance / params.c) ** (1.0 / params.beta)
        if not s > 0:
            continue
        u = inputs[i] if inputs is not None else None
        if u is not None and not 0.0 <= u <= 1.0:
            logger.debug(f"Dropping equilibrium x={x:.6g}: input {u:.6g} outside [0, 1]")
            continue
        points.append(EquilibriumPoint(s_star=float(s), x_star=x, u_star=u))
    return points


def solve_equilibrium_open_loop(
    params: ModelParams, D: float, grid_points: int = DEFAULT_GRID_POINTS
) -> List[EquilibriumPoint]:
    """
    All positive equilibria under a constant dilution D.

    The admissible biomass interval is scanned on a log-spaced grid; every
    sign change of equilibrium_residual is polished with brentq.

    Args:
        params: Model constants
        D: Constant input level, D >= 0
        grid_points: Number of log-spaced bracketing nodes

    Returns:
        Equilibria sorted by x*, possibly empty

    Example:
        >>> points = solve_equilibrium_open_loop(ZYMOMONAS_PARAMS, 0.15)
        >>> round(points[-1].x_star, 2)
        4.81
    """
    if D < 0:
        raise DomainError("D_nonnegative", f"D={D} must be nonnegative")
    roots = _bracket_roots(params, D, proportional=False, grid_points=grid_points)
    points = _points_from_roots(params, roots)
    logger.info(
        f"Open-loop equilibria for D={D}: "
        + (", ".join(f"x*={p.x_star:.6g}" for p in points) or "none")
    )
    return points


def solve_equilibrium_proportional(
    params: ModelParams, k_r: float, grid_points: int = DEFAULT_GRID_POINTS
) -> List[EquilibriumPoint]:
    """
    Equilibria of the closed loop under the steady-state law u = k_r * x.

    A delayed proportional law u(t) = k_r x(t - h) has the same equilibria,
    which generally differ from the open-loop point the gains were tuned at.
    """
    if k_r < 0:
        raise DomainError("k_r_nonnegative", f"k_r={k_r} must be nonnegative")
    roots = _bracket_roots(params, k_r, proportional=True, grid_points=grid_points)
    return _points_from_roots(params, roots, [k_r * x for x in roots])


def solve_equilibrium_closed_loop(params: ModelParams, x_star: float) -> EquilibriumPoint:
    """
    Equilibrium and steady input that hold the biomass at a prescribed x*.

    Raises:
        DomainError: Naming the first violated precondition
            (x_positive, admissibility, substrate_below_feed, input_saturation)
    """
    s_star = equilibrium_substrate(params, x_star)
    if s_star >= params.s0 or math.isclose(s_star, params.s0, rel_tol=1e-12):
        raise DomainError(
            "substrate_below_feed", f"s*={s_star:.6g} must be below s0={params.s0}"
        )
    uptake = (params.a + params.b * x_star**params.alpha) * s_star**params.beta
    u_star = uptake / (params.s0 - s_star)
    if u_star > 1.0:
        raise DomainError(
            "input_saturation", f"u*={u_star:.6g} exceeds the fully open valve"
        )
    return EquilibriumPoint(s_star=s_star, x_star=float(x_star), u_star=float(u_star))


def linearize(
    params: ModelParams, eq: EquilibriumPoint, input_level: float
) -> LinearizedModel:
    """
    Analytic Jacobians of the delayed model at an equilibrium.

    Args:
        params: Model constants (tau becomes the state delay)
        eq: Operating point
        input_level: Input held at the operating point (D or u*)

    Returns:
        LinearizedModel with A0 = d f / d(s, x), A1 = d f / d x(t - tau) and
        B = d f / d u
    """
    if input_level < 0:
        raise DomainError("input_nonnegative", f"input_level={input_level} < 0")
    p = params
    s, x = eq.s_star, eq.x_star
    s_beta = s**p.beta
    s_beta_1 = s ** (p.beta - 1.0)
    x_alpha = x**p.alpha
    x_alpha_1 = x ** (p.alpha - 1.0)

    A0 = np.array(
        [
            [p.beta * (-p.a - p.b * x_alpha) * s_beta_1 - input_level, 0.0],
            [
                p.beta * p.c * s_beta_1 * x_alpha,
                p.alpha * (p.c * s_beta - p.d) * x_alpha_1 + p.e,
            ],
        ]
    )
    A1 = np.array([[0.0, -p.b * p.alpha * s_beta * x_alpha_1], [0.0, 0.0]])
    B = np.array([p.s0 - s, 0.0])
    return LinearizedModel(
        A0=A0, A1=A1, B=B, state_delay=p.tau, equilibrium=eq, input_level=input_level
    )


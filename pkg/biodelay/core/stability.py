"""
biodelay Stability Analysis

Delay-crossing analysis of the open-loop quasi-polynomial
lambda^2 + k1 lambda + k2 + k3 e^(-tau lambda): crossing frequencies,
critical delays, Hopf crossing direction and the stability window.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional

from .constants import DEFAULT_N_MAX, GENUINE_TOL
from .errors import UnstableAtZeroDelayError
from .quasipoly import QuasiPolynomial

logger = logging.getLogger(__name__)


class DelayCandidate(NamedTuple):
    """One branch tau_n of the critical-delay family for a crossing frequency."""

    tau: float
    genuine: bool


class CrossingCandidate(NamedTuple):
    omega0: float
    tau: float
    genuine: bool


@dataclass(frozen=True)
class CrossingSet:
    """Crossing frequencies and their candidate delays, sorted by tau."""

    omega0: List[float] = field(default_factory=list)
    tau_candidates: List[CrossingCandidate] = field(default_factory=list)

    @property
    def genuine_delays(self) -> List[float]:
        return [c.tau for c in self.tau_candidates if c.genuine]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega0": list(self.omega0),
            "tau": [
                {"omega0": c.omega0, "value": c.tau, "genuine": c.genuine}
                for c in self.tau_candidates
            ],
        }


@dataclass(frozen=True)
class StabilityWindow:
    """Delay interval (lower, upper) on which the equilibrium is stable."""

    lower: float
    upper: float
    delay_independent: bool = False

    def contains(self, tau: float) -> bool:
        return self.lower <= tau < self.upper

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower": self.lower,
            "upper": None if math.isinf(self.upper) else self.upper,
            "delay_independent": self.delay_independent,
        }


def frequency_polynomial(qp: QuasiPolynomial) -> List[float]:
    """Coefficients [1, k1^2 - 2 k2, k2^2 - k3^2] of P in the variable omega^2."""
    k1, k2, k3 = qp.kappas
    return [1.0, k1 * k1 - 2.0 * k2, k2 * k2 - k3 * k3]


def crossing_frequencies(qp: QuasiPolynomial) -> List[float]:
    """
    Positive frequencies omega at which +/- i omega can be a root for some delay.

    Solves omega^4 + (k1^2 - 2 k2) omega^2 + (k2^2 - k3^2) = 0 as a quadratic
    in omega^2 and keeps the positive real roots.

    Raises:
        StructureError: If qp does not have exactly one exponential term

    Example:
        >>> qp = QuasiPolynomial.from_kappas(0.37985, 0.02011, 0.09791, 1.8)
        >>> [round(w, 4) for w in crossing_frequencies(qp)]
        [0.2388]
    """
    _, b, c = frequency_polynomial(qp)
    disc = b * b - 4.0 * c
    if disc < 0:
        return []
    root = math.sqrt(disc)
    squares = {0.5 * (-b + root), 0.5 * (-b - root)}
    omegas = sorted(math.sqrt(z) for z in squares if z > 0)
    logger.debug(f"Crossing frequencies: {omegas}")
    return omegas


def _is_genuine(qp: QuasiPolynomial, omega: float, tau: float) -> bool:
    k1, k2, k3 = qp.kappas
    cos_ok = abs(math.cos(omega * tau) - (omega * omega - k2) / k3) < GENUINE_TOL
    sin_ok = abs(math.sin(omega * tau) - k1 * omega / k3) < GENUINE_TOL
    return cos_ok and sin_ok


def critical_delays(
    qp: QuasiPolynomial, omega0: float, n_max: int = DEFAULT_N_MAX
) -> List[DelayCandidate]:
    """
    Candidate delays tau_n = atan(k1 w / (w^2 - k2)) / w + n pi / w, n = 0..n_max.

    The tangent relation admits every branch n, but only those satisfying
    both cos(w tau) = (w^2 - k2) / k3 and sin(w tau) = k1 w / k3 are genuine
    crossings; consecutive genuine delays are 2 pi / w apart. Nonpositive
    candidates are dropped.

    Args:
        qp: Open-loop quasi-polynomial
        omega0: Crossing frequency of qp
        n_max: Last branch index

    Returns:
        Candidates sorted by tau; empty when k3 = 0
    """
    k1, k2, k3 = qp.kappas
    if k3 == 0.0 or omega0 <= 0:
        return []
    denominator = omega0 * omega0 - k2
    if denominator == 0.0:
        phase = math.pi / 2.0
    else:
        phase = math.atan(k1 * omega0 / denominator)
    candidates = []
    for n in range(n_max + 1):
        tau = (phase + n * math.pi) / omega0
        if tau <= 0:
            continue
        candidates.append(DelayCandidate(tau, _is_genuine(qp, omega0, tau)))
    return sorted(candidates)


def crossing_direction(qp: QuasiPolynomial) -> int:
    """
    Sign of Re(d lambda / d tau) at the crossings, sign(k1^2 - 2 k2).

    +1 means roots move into the right half-plane as tau increases.
    """
    k1, k2, _ = qp.kappas
    value = k1 * k1 - 2.0 * k2
    return (value > 0) - (value < 0)


def crossing_direction_at(qp: QuasiPolynomial, omega0: float) -> int:
    """Exact crossing direction at one frequency: sign(2 w^2 + k1^2 - 2 k2)."""
    k1, k2, _ = qp.kappas
    value = 2.0 * omega0 * omega0 + k1 * k1 - 2.0 * k2
    return (value > 0) - (value < 0)


def crossing_set(qp: QuasiPolynomial, n_max: int = DEFAULT_N_MAX) -> CrossingSet:
    """All crossing frequencies with their candidate delays."""
    omegas = crossing_frequencies(qp)
    candidates = [
        CrossingCandidate(omega, c.tau, c.genuine)
        for omega in omegas
        for c in critical_delays(qp, omega, n_max)
    ]
    candidates.sort(key=lambda c: (c.tau, c.omega0))
    return CrossingSet(omega0=omegas, tau_candidates=candidates)


def is_hurwitz_at_zero_delay(qp: QuasiPolynomial) -> bool:
    """True when lambda^2 + k1 lambda + (k2 + k3) has both roots in Re < 0."""
    k1, k2, k3 = qp.kappas
    return k1 > 0 and k2 + k3 > 0


def stability_window(qp: QuasiPolynomial) -> StabilityWindow:
    """
    Delay interval on which the open-loop equilibrium stays stable.

    Returns:
        (0, first genuine crossing delay), or (0, inf) flagged
        delay_independent when no crossing frequency exists

    Raises:
        UnstableAtZeroDelayError: If the delay-free quadratic is not Hurwitz
    """
    if not is_hurwitz_at_zero_delay(qp):
        k1, k2, k3 = qp.kappas
        raise UnstableAtZeroDelayError(
            f"unstable at tau=0 (k1={k1:.6g}, k2+k3={k2 + k3:.6g})"
        )
    omegas = crossing_frequencies(qp)
    first: Optional[float] = None
    for omega in omegas:
        if crossing_direction_at(qp, omega) <= 0:
            logger.debug(f"Crossing at omega={omega:.6g} is not destabilizing")
            continue
        genuine = [c.tau for c in critical_delays(qp, omega, n_max=2) if c.genuine]
        if genuine and (first is None or genuine[0] < first):
            first = genuine[0]
    if first is None:
        logger.info("No destabilizing crossing: stable for every delay")
        return StabilityWindow(0.0, math.inf, delay_independent=True)
    logger.info(f"Stable for tau in (0, {first:.6g})")
    return StabilityWindow(0.0, first)

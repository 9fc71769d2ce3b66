"""
biodelay Quasi-polynomials

Characteristic functions q(lambda) = lambda^2 + p1 lambda + p0 + sum c_j e^(-d_j lambda)
of the linearized bioreactor, built by expanding
det(lambda I - A0 - A1 e^(-tau lambda) - B K e^(-h lambda)) for K = (0, k_r).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Tuple, Union

import numpy as np

from .errors import DomainError, StructureError
from .model import LinearizedModel

logger = logging.getLogger(__name__)

ComplexLike = Union[complex, np.ndarray]


@dataclass(frozen=True)
class QuasiPolynomial:
    """
    Monic second-order quasi-polynomial with exponential terms.

    Attributes:
        p1: Coefficient of lambda
        p0: Constant coefficient
        exp_terms: (coefficient, delay) pairs, delays >= 0, sorted by delay
    """

    p1: float
    p0: float
    exp_terms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        terms = tuple((float(c), float(d)) for c, d in self.exp_terms)
        for coeff, delay in terms:
            if not (math.isfinite(coeff) and math.isfinite(delay)):
                raise DomainError("finite_terms", f"term ({coeff}, {delay}) not finite")
            if delay < 0:
                raise DomainError("delay_nonnegative", f"delay {delay} is negative")
        object.__setattr__(self, "p1", float(self.p1))
        object.__setattr__(self, "p0", float(self.p0))
        object.__setattr__(self, "exp_terms", tuple(sorted(terms, key=lambda t: t[1])))

    @classmethod
    def from_kappas(
        cls, kappa1: float, kappa2: float, kappa3: float, tau: float
    ) -> "QuasiPolynomial":
        """Open-loop form lambda^2 + k1 lambda + k2 + k3 e^(-tau lambda)."""
        return cls(p1=kappa1, p0=kappa2, exp_terms=((kappa3, tau),))

    @property
    def kappas(self) -> Tuple[float, float, float]:
        """(kappa1, kappa2, kappa3) of an open-loop quasi-polynomial."""
        self.require_single_delay()
        return self.p1, self.p0, self.exp_terms[0][0]

    @property
    def max_delay(self) -> float:
        return max((d for _, d in self.exp_terms), default=0.0)

    def require_single_delay(self) -> None:
        if len(self.exp_terms) != 1:
            raise StructureError(
                f"expected exactly one exponential term, got {len(self.exp_terms)}"
            )

    def with_delays(self, delays: Iterable[float]) -> "QuasiPolynomial":
        """Same coefficients, new delays (one per exponential term, in order)."""
        delays = list(delays)
        if len(delays) != len(self.exp_terms):
            raise StructureError("one delay per exponential term is required")
        terms = tuple((c, float(d)) for (c, _), d in zip(self.exp_terms, delays))
        return QuasiPolynomial(self.p1, self.p0, terms)

    def evaluate(self, lam: ComplexLike) -> ComplexLike:
        """q(lambda); accepts scalars or numpy arrays."""
        value = lam * lam + self.p1 * lam + self.p0
        for coeff, delay in self.exp_terms:
            value = value + coeff * np.exp(-delay * lam)
        return value

    def derivative(self, lam: ComplexLike) -> ComplexLike:
        """dq/dlambda."""
        value = 2.0 * lam + self.p1
        for coeff, delay in self.exp_terms:
            value = value - coeff * delay * np.exp(-delay * lam)
        return value

    def shifted(self, sigma: float) -> "QuasiPolynomial":
        """
        q_sigma(lambda) = q(lambda - sigma).

        The roots of q_sigma are those of q moved right by sigma, so q is
        sigma-stable exactly when q_sigma is stable.
        """
        terms = tuple((c * math.exp(d * sigma), d) for c, d in self.exp_terms)
        return QuasiPolynomial(
            p1=self.p1 - 2.0 * sigma,
            p0=sigma * sigma - self.p1 * sigma + self.p0,
            exp_terms=terms,
        )

    def root_radius(self, sigma: float = 0.0) -> float:
        """
        Radius containing every root with Re(lambda) >= -sigma.

        On that half-plane |e^(-d lambda)| <= e^(sigma d), so |lambda|^2 is
        bounded by A|lambda| + B with the coefficient magnitudes below.
        """
        A = abs(self.p1)
        B = abs(self.p0) + sum(abs(c) * math.exp(d * sigma) for c, d in self.exp_terms)
        return 0.5 * (A + math.sqrt(A * A + 4.0 * B))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p1": self.p1,
            "p0": self.p0,
            "exp_terms": [{"coeff": c, "delay": d} for c, d in self.exp_terms],
        }


def _determinant_parts(lin: LinearizedModel) -> Tuple[float, float, float, float]:
    """p1, p0, delayed-state coefficient and control authority mu."""
    A0, A1, B = lin.A0, lin.A1, lin.B
    p1 = -(A0[0, 0] + A0[1, 1])
    p0 = A0[0, 0] * A0[1, 1] - A0[0, 1] * A0[1, 0]
    delayed = -A0[1, 0] * A1[0, 1]
    mu = -A0[1, 0] * B[0]
    return float(p1), float(p0), float(delayed), float(mu)


def controller_authority(lin: LinearizedModel) -> float:
    """Signed coefficient mu of k_r e^(-h lambda) in the closed-loop quasi-polynomial."""
    return _determinant_parts(lin)[3]


def closed_loop_coefficients(lin: LinearizedModel) -> Tuple[float, float, float, float]:
    """(eta1, eta2, eta3, mu) with q = l^2 + eta1 l + eta2 + eta3 e^(-tau l) + mu k_r e^(-h l)."""
    return _determinant_parts(lin)


def open_loop_quasipolynomial(lin: LinearizedModel) -> QuasiPolynomial:
    """
    Characteristic quasi-polynomial of the uncontrolled linearization.

    Returns:
        QuasiPolynomial with p1=kappa1, p0=kappa2 and the single term
        (kappa3, tau). The term is kept even when kappa3 is zero.
    """
    p1, p0, delayed, _ = _determinant_parts(lin)
    qp = QuasiPolynomial(p1=p1, p0=p0, exp_terms=((delayed, lin.state_delay),))
    logger.debug(f"Open-loop kappas: {p1:.6g}, {p0:.6g}, {delayed:.6g}")
    return qp


def closed_loop_quasipolynomial(
    lin: LinearizedModel, k_r: float, h: float
) -> QuasiPolynomial:
    """
    Characteristic quasi-polynomial under u(t) = k_r x(t - h).

    The controller term carries the signed coefficient mu*k_r from the
    determinant expansion; with k_r = 0 it is omitted so the result equals
    open_loop_quasipolynomial(lin).

    Raises:
        DomainError: If h < 0
    """
    if h < 0:
        raise DomainError("h_nonnegative", f"h={h} must be nonnegative")
    p1, p0, delayed, mu = _determinant_parts(lin)
    terms = [(delayed, lin.state_delay)]
    if k_r != 0.0:
        terms.append((mu * k_r, h))
    return QuasiPolynomial(p1=p1, p0=p0, exp_terms=tuple(terms))

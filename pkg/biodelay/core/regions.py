"""
biodelay Sigma-Stability Regions

D-partition of the (h, k_r) gain plane for the delayed controller
u(t) = k_r x(t - h), and the search for the largest achievable decay rate.

For a decay margin sigma the closed-loop quasi-polynomial
q(l) = l^2 + eta1 l + eta2 + eta3 e^(-tau l) + mu k_r e^(-h l)
is shifted to q_sigma(l) = q(l - sigma); its root count can change only
where q_sigma(0) = 0 or q_sigma(i w) = 0.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    BOUNDARY_TOL,
    DECAY_COARSE_GRID,
    DECAY_GRID,
    DECAY_MIN_CELLS,
    DECAY_SIGMA_START,
    DECAY_SIGMA_TOL,
    DEFAULT_H_POINTS,
    DEFAULT_H_RANGE,
    DEFAULT_N_RANGE,
    DEFAULT_OMEGA_CAP,
    DEFAULT_OMEGA_MAX,
    DEFAULT_OMEGA_POINTS,
    OMEGA_LOG_FLOOR,
    OMEGA_LOG_SPLIT,
    SEGMENT_JUMP_FACTOR,
)
from .errors import DegenerateError, DomainError, EmptyRegionError
from .model import LinearizedModel
from .quasipoly import closed_loop_coefficients, closed_loop_quasipolynomial
from .roots import count_roots_batch, count_roots_right_of

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """
    One sampled boundary curve in the (h, k_r) plane.

    Attributes:
        kind: "lambda0" for the real-root boundary, "iomega" for crossing curves
        n: Branch index of an iomega curve, None for lambda0
        points: (N, 2) array of (h, k_r)
        parameter: Generating value per point (h for lambda0, omega for iomega)
    """

    kind: str
    n: Optional[int]
    points: np.ndarray
    parameter: np.ndarray

    def __post_init__(self) -> None:
        for name in ("points", "parameter"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind, "n": self.n, "points": self.points.tolist()}


@dataclass(frozen=True, eq=False)
class SigmaRegion:
    """Boundary curves of the sigma-stability partition over an h interval."""

    sigma: float
    lambda0_curve: BoundaryCurve
    iw_curves: List[BoundaryCurve] = field(default_factory=list)
    h_range: Interval = DEFAULT_H_RANGE

    @property
    def curves(self) -> List[BoundaryCurve]:
        return [self.lambda0_curve] + list(self.iw_curves)

    def all_points(self) -> np.ndarray:
        stacked = [c.points for c in self.curves if len(c.points)]
        if not stacked:
            return np.empty((0, 2))
        return np.vstack(stacked)

    def passes_near(self, h: float, k_r: float, tol_h: float, tol_k: float) -> bool:
        """True when some boundary point lies in the box |dh| <= tol_h, |dk| <= tol_k."""
        points = self.all_points()
        if len(points) == 0:
            return False
        close = (np.abs(points[:, 0] - h) <= tol_h) & (np.abs(points[:, 1] - k_r) <= tol_k)
        return bool(np.any(close))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "h_range": list(self.h_range),
            "curves": [c.to_dict() for c in self.curves],
        }


@dataclass(frozen=True)
class MaxDecayResult:
    """Largest sigma with a nonempty sigma-stable gain set, and where it collapses."""

    sigma_star: float
    collapse_point: Tuple[float, float]
    surviving_cells: int
    bisection_steps: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma_star": self.sigma_star,
            "collapse_point": list(self.collapse_point),
            "surviving_cells": self.surviving_cells,
            "bisection_steps": self.bisection_steps,
        }


def _require_authority(lin: LinearizedModel) -> Tuple[float, float, float, float]:
    eta1, eta2, eta3, mu = closed_loop_coefficients(lin)
    if mu == 0.0:
        raise DegenerateError("controller has no authority (mu = 0)")
    return eta1, eta2, eta3, mu


def omega_grid(omega_max: float, points: int = DEFAULT_OMEGA_POINTS) -> np.ndarray:
    """Logarithmic below 0.1 rad/h, linear from 0.1 up to omega_max."""
    if omega_max <= OMEGA_LOG_SPLIT:
        return np.geomspace(OMEGA_LOG_FLOOR, omega_max, points)
    n_log = points // 4
    low = np.geomspace(OMEGA_LOG_FLOOR, OMEGA_LOG_SPLIT, n_log, endpoint=False)
    high = np.linspace(OMEGA_LOG_SPLIT, omega_max, points - n_log)
    return np.concatenate([low, high])


def _closed_loop_residual(
    coefficients: Tuple[float, float, float, float],
    tau: float,
    h: np.ndarray,
    k_r: np.ndarray,
    lam: np.ndarray,
) -> np.ndarray:
    eta1, eta2, eta3, mu = coefficients
    value = lam * lam + eta1 * lam + eta2 + eta3 * np.exp(-tau * lam)
    return np.abs(value + mu * k_r * np.exp(-h * lam))


def _split_segments(indices: np.ndarray, h: np.ndarray) -> List[np.ndarray]:
    """Split kept sample indices at gaps and at branch jumps in h."""
    if len(indices) == 0:
        return []
    breaks = np.diff(indices) > 1
    jumps = np.abs(np.diff(h))
    if len(jumps):
        typical = float(np.median(jumps))
        if typical > 0:
            breaks |= jumps > SEGMENT_JUMP_FACTOR * typical
    cut = np.nonzero(breaks)[0] + 1
    return [seg for seg in np.split(np.arange(len(indices)), cut) if len(seg)]


def sigma_region_boundaries(
    lin: LinearizedModel,
    sigma: float,
    h_range: Interval = DEFAULT_H_RANGE,
    omega_max: float = DEFAULT_OMEGA_MAX,
    n_range: Tuple[int, int] = DEFAULT_N_RANGE,
    omega_points: int = DEFAULT_OMEGA_POINTS,
    h_points: int = DEFAULT_H_POINTS,
) -> SigmaRegion:
    """
    Trace the sigma-stability boundaries in the (h, k_r) plane.

    Real-root boundary (lambda = -sigma):
        k_r(h) = -(sigma^2 - eta1 sigma + eta2 + eta3 e^(tau sigma)) / (mu e^(h sigma))
    Crossing boundaries (lambda = -sigma + i w), for each branch n:
        h = (acot(-Phi / Theta) + n pi) / w,  k_r = Theta / (mu sin(h w) e^(h sigma))
    with Phi = sigma^2 - w^2 - eta1 sigma + eta2 + eta3 cos(tau w) e^(tau sigma)
    and Theta = eta1 w - 2 w sigma - eta3 sin(tau w) e^(tau sigma).

    Points outside h_range, non-finite points, and points whose
    back-substituted |q_sigma| is not below 1e-8 are discarded.

    Args:
        lin: Closed-loop linearization (input level u*)
        sigma: Decay margin, sigma >= 0
        h_range: Controller-delay interval to keep
        omega_max: Largest crossing frequency sampled
        n_range: Inclusive range of branch indices
        omega_points: Size of the log+linear frequency grid
        h_points: Samples of the real-root boundary

    Raises:
        DomainError: If sigma < 0 or the h interval is empty
        DegenerateError: If mu = 0
    """
    if sigma < 0:
        raise DomainError("sigma_nonnegative", f"sigma={sigma} must be nonnegative")
    h_lo, h_hi = h_range
    if not h_lo < h_hi:
        raise DomainError("h_range", f"empty interval {h_range}")
    coefficients = _require_authority(lin)
    eta1, eta2, eta3, mu = coefficients
    tau = lin.state_delay
    stretch = math.exp(tau * sigma)

    # lambda = -sigma
    hs = np.linspace(h_lo, h_hi, h_points)
    constant = sigma * sigma - eta1 * sigma + eta2 + eta3 * stretch
    ks = -constant / (mu * np.exp(hs * sigma))
    residual = _closed_loop_residual(coefficients, tau, hs, ks, np.full_like(hs, -sigma))
    keep = np.isfinite(ks) & (residual < BOUNDARY_TOL)
    lambda0 = BoundaryCurve(
        kind="lambda0", n=None, points=np.column_stack([hs[keep], ks[keep]]), parameter=hs[keep]
    )

    # lambda = -sigma + i w
    omegas = omega_grid(omega_max, omega_points)
    phi = (
        sigma * sigma
        - omegas * omegas
        - eta1 * sigma
        + eta2
        + eta3 * np.cos(tau * omegas) * stretch
    )
    theta = eta1 * omegas - 2.0 * omegas * sigma - eta3 * np.sin(tau * omegas) * stretch
    with np.errstate(divide="ignore", invalid="ignore"):
        acot = 0.5 * math.pi - np.arctan(-phi / theta)

    curves: List[BoundaryCurve] = []
    lam = -sigma + 1j * omegas
    for n in range(n_range[0], n_range[1] + 1):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            h_hat = (acot + n * math.pi) / omegas
            k_hat = theta / (mu * np.sin(h_hat * omegas) * np.exp(h_hat * sigma))
            residual = _closed_loop_residual(coefficients, tau, h_hat, k_hat, lam)
        keep = (
            np.isfinite(h_hat)
            & np.isfinite(k_hat)
            & (h_hat >= h_lo)
            & (h_hat <= h_hi)
            & (residual < BOUNDARY_TOL)
        )
        indices = np.nonzero(keep)[0]
        for segment in _split_segments(indices, h_hat[indices]):
            idx = indices[segment]
            curves.append(
                BoundaryCurve(
                    kind="iomega",
                    n=n,
                    points=np.column_stack([h_hat[idx], k_hat[idx]]),
                    parameter=omegas[idx],
                )
            )

    logger.info(
        f"sigma={sigma}: {len(lambda0.points)} real-root points, "
        f"{len(curves)} crossing segments"
    )
    return SigmaRegion(sigma=sigma, lambda0_curve=lambda0, iw_curves=curves, h_range=h_range)


def classify_region_point(
    lin: LinearizedModel,
    k_r: float,
    h: float,
    sigma: float,
    omega_cap: float = DEFAULT_OMEGA_CAP,
) -> bool:
    """
    True when the closed loop at gains (h, k_r) is sigma-stable.

    Raises:
        DegenerateError: If mu = 0
        ContourProximityError: Propagated from root counting
    """
    _require_authority(lin)
    qp = closed_loop_quasipolynomial(lin, k_r, h)
    return count_roots_right_of(qp, sigma, omega_cap) == 0


def classify_grid(
    lin: LinearizedModel,
    hs: Sequence[float],
    ks: Sequence[float],
    sigma: float,
    omega_cap: float = DEFAULT_OMEGA_CAP,
) -> np.ndarray:
    """
    Vectorised classify_region_point over the grid hs x ks.

    Returns:
        Boolean array of shape (len(hs), len(ks)); True marks sigma-stable gains
    """
    hs = np.asarray(hs, dtype=float)
    ks = np.asarray(ks, dtype=float)
    H, K = np.meshgrid(hs, ks, indexing="ij")
    stable = _classify_points(lin, H.ravel(), K.ravel(), sigma, omega_cap)
    return stable.reshape(H.shape)


def _classify_points(
    lin: LinearizedModel,
    hs: np.ndarray,
    ks: np.ndarray,
    sigma: float,
    omega_cap: float = DEFAULT_OMEGA_CAP,
) -> np.ndarray:
    _, _, _, mu = _require_authority(lin)
    base = closed_loop_quasipolynomial(lin, 0.0, 0.0)
    if len(hs) == 0:
        return np.zeros(0, dtype=bool)
    counts = count_roots_batch(base, mu * ks, hs, sigma, omega_cap)
    return counts == 0


def _padded_box(points: np.ndarray, pad_h: float, pad_k: float) -> Tuple[Interval, Interval]:
    h_box = (float(points[:, 0].min()) - pad_h, float(points[:, 0].max()) + pad_h)
    k_box = (float(points[:, 1].min()) - pad_k, float(points[:, 1].max()) + pad_k)
    return h_box, k_box


def _grid_points(h_box: Interval, k_box: Interval, size: int) -> Tuple[np.ndarray, float, float]:
    hs = np.linspace(h_box[0], h_box[1], size)
    ks = np.linspace(k_box[0], k_box[1], size)
    H, K = np.meshgrid(hs, ks, indexing="ij")
    return np.column_stack([H.ravel(), K.ravel()]), hs[1] - hs[0], ks[1] - ks[0]


def _stable_subset(
    lin: LinearizedModel, points: np.ndarray, sigma: float, omega_cap: float
) -> np.ndarray:
    stable = _classify_points(lin, points[:, 0], points[:, 1], sigma, omega_cap)
    return points[stable]


def max_decay_rate(
    lin: LinearizedModel,
    h_range: Interval = DEFAULT_H_RANGE,
    k_range: Optional[Interval] = None,
    grid: int = DECAY_GRID,
    sigma_tol: float = DECAY_SIGMA_TOL,
    omega_cap: float = DEFAULT_OMEGA_CAP,
) -> MaxDecayResult:
    """
    Largest decay margin sigma* reachable by some gains (h, k_r), and where.

    The sigma = 0 stable set is located on a coarse scan, then resampled on a
    grid x grid lattice over its padded bounding box. Bisection on sigma keeps
    only the points that survive (sigma-stable sets are nested), and the
    lattice is re-centred on the survivors whenever they thin out, so the
    set can be followed down to its collapse point.

    Args:
        lin: Closed-loop linearization
        h_range: Controller-delay interval searched
        k_range: Gain interval searched; defaults to +/- 2 |(eta2 + eta3) / mu|
        grid: Lattice size per axis
        sigma_tol: Bisection stops when the sigma bracket is narrower than this

    Returns:
        MaxDecayResult with sigma* and the centroid of the last surviving cells

    Raises:
        EmptyRegionError: If no gain in the box is stable at sigma = 0
    """
    _, eta2, eta3, mu = _require_authority(lin)
    if k_range is None:
        k_ref = abs((eta2 + eta3) / mu)
        k_range = (-2.0 * k_ref, 2.0 * k_ref)

    coarse, dh, dk = _grid_points(h_range, k_range, DECAY_COARSE_GRID)
    seed = _stable_subset(lin, coarse, 0.0, omega_cap)
    if len(seed) == 0:
        raise EmptyRegionError(f"no stable gains for h in {h_range}, k_r in {k_range}")
    h_box, k_box = _padded_box(seed, dh, dk)
    lattice, dh, dk = _grid_points(h_box, k_box, grid)
    survivors = _stable_subset(lin, lattice, 0.0, omega_cap)
    logger.info(f"sigma=0 stable set: {len(survivors)} of {len(lattice)} lattice points")

    def advance(
        sigma: float, current: np.ndarray, dh: float, dk: float
    ) -> Tuple[np.ndarray, float, float]:
        """Survivors at sigma, re-gridded around them once if too few remain."""
        kept = _stable_subset(lin, current, sigma, omega_cap)
        if 0 < len(kept) < DECAY_MIN_CELLS:
            h_box, k_box = _padded_box(kept, dh, dk)
            zoomed, zdh, zdk = _grid_points(h_box, k_box, grid)
            kept = _stable_subset(lin, zoomed, sigma, omega_cap)
            return kept, zdh, zdk
        return kept, dh, dk

    sigma_lo, sigma_hi = 0.0, DECAY_SIGMA_START
    while True:
        trial, _, _ = advance(sigma_hi, survivors, dh, dk)
        if len(trial) < DECAY_MIN_CELLS:
            break
        sigma_lo, survivors = sigma_hi, trial
        sigma_hi *= 2.0

    steps = 0
    while sigma_hi - sigma_lo >= sigma_tol:
        steps += 1
        mid = 0.5 * (sigma_lo + sigma_hi)
        kept, kdh, kdk = advance(mid, survivors, dh, dk)
        if len(kept) >= DECAY_MIN_CELLS:
            sigma_lo, survivors, dh, dk = mid, kept, kdh, kdk
            if len(survivors) < grid:
                h_box, k_box = _padded_box(survivors, dh, dk)
                lattice, dh, dk = _grid_points(h_box, k_box, grid)
                survivors = _stable_subset(lin, lattice, sigma_lo, omega_cap)
        else:
            sigma_hi = mid
        logger.debug(
            f"Bisection step {steps}: sigma in [{sigma_lo:.5f}, {sigma_hi:.5f}], "
            f"{len(survivors)} surviving points"
        )

    centroid = survivors.mean(axis=0)
    logger.info(
        f"Maximum decay sigma*={sigma_lo:.4f} at (h, k_r)=({centroid[0]:.4f}, {centroid[1]:.5f})"
    )
    return MaxDecayResult(
        sigma_star=float(sigma_lo),
        collapse_point=(float(centroid[0]), float(centroid[1])),
        surviving_cells=int(len(survivors)),
        bisection_steps=steps,
    )


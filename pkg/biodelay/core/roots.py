"""
biodelay Root Counting

Argument-principle root counts for quasi-polynomials on the rectangle
[-sigma, R] x [-Omega, Omega], where R bounds every root with Re >= -sigma.
"""

import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from .constants import (
    BATCH_CHUNK,
    BATCH_PHASE_LIMIT,
    CONTOUR_JITTER_RETRIES,
    CONTOUR_JITTER_STEP,
    CONTOUR_MIN_MODULUS,
    DEFAULT_OMEGA_CAP,
    PHASE_REFINE_LIMIT,
)
from .errors import ContourProximityError, DegenerateError
from .quasipoly import QuasiPolynomial

logger = logging.getLogger(__name__)

_MAX_REFINEMENTS = 20
_MAX_PATH_POINTS = 2_000_000
_EDGE_MIN_POINTS = 64
_EDGE_MAX_POINTS = 200_000
_BATCH_CELLS = 4_000_000


def _edge_points(length: float, max_delay: float, density: float) -> int:
    n = int(length * max(max_delay, 1.0) * density) + _EDGE_MIN_POINTS
    return min(max(n, _EDGE_MIN_POINTS), _EDGE_MAX_POINTS)


def _rectangle(
    left: float, right: float, top: float, max_delay: float, density: float = 8.0
) -> np.ndarray:
    """Closed counterclockwise rectangle; the first point is repeated at the end."""
    n_h = _edge_points(right - left, max_delay, density / 2.0)
    n_v = _edge_points(2.0 * top, max_delay, density)
    xs = np.linspace(left, right, n_h, endpoint=False)
    ys = np.linspace(-top, top, n_v, endpoint=False)
    bottom = xs - 1j * top
    right_edge = right + 1j * ys
    top_edge = xs[::-1] + (right - left) / n_h + 1j * top
    left_edge = left + 1j * ys[::-1] + 1j * (2.0 * top / n_v)
    path = np.concatenate([bottom, right_edge, top_edge, left_edge])
    return np.append(path, path[0])


def _winding(
    f: Callable[[np.ndarray], np.ndarray], path: np.ndarray
) -> Tuple[float, float]:
    """
    Net turns of f along a closed path, refining segments with large phase jumps.

    Returns:
        (turns, minimum modulus of f on the sampled path)
    """
    values = f(path)
    min_modulus = float(np.min(np.abs(values)))
    if min_modulus < CONTOUR_MIN_MODULUS:
        return math.nan, min_modulus

    for _ in range(_MAX_REFINEMENTS):
        increments = np.angle(values[1:] / values[:-1])
        bad = np.abs(increments) > PHASE_REFINE_LIMIT
        if not bad.any() or len(path) > _MAX_PATH_POINTS:
            break
        mids = 0.5 * (path[:-1][bad] + path[1:][bad])
        mid_values = f(mids)
        min_modulus = min(min_modulus, float(np.min(np.abs(mid_values))))
        if min_modulus < CONTOUR_MIN_MODULUS:
            return math.nan, min_modulus
        where = np.nonzero(bad)[0] + 1
        path = np.insert(path, where, mids)
        values = np.insert(values, where, mid_values)
    else:
        increments = np.angle(values[1:] / values[:-1])

    return float(np.sum(increments) / (2.0 * math.pi)), min_modulus


def _contour_box(qp: QuasiPolynomial, sigma: float, omega_cap: float) -> Tuple[float, float]:
    radius = qp.root_radius(sigma)
    reach = 1.1 * radius + 1.0
    right = max(reach, -sigma + 1.0)
    top = min(omega_cap, reach)
    return right, top


def count_roots_right_of(
    qp: QuasiPolynomial, sigma: float, omega_cap: float = DEFAULT_OMEGA_CAP
) -> int:
    """
    Number of roots with Re(lambda) > -sigma and |Im(lambda)| <= omega_cap.

    A root on the contour (|q| < 1e-9 at a sample) triggers a retry with the
    left edge nudged right and the horizontal edges nudged outward.

    Args:
        qp: Quasi-polynomial to examine
        sigma: Decay margin; sigma = 0 counts closed right half-plane roots
        omega_cap: Half-height cap of the counting rectangle

    Returns:
        Root count (multiplicities included)

    Raises:
        ContourProximityError: If every jittered contour still touches a root
    """
    right, top = _contour_box(qp, sigma, omega_cap)
    min_modulus = math.inf
    for attempt in range(CONTOUR_JITTER_RETRIES + 1):
        jitter = 0.0 if attempt == 0 else CONTOUR_JITTER_STEP * 2 ** (attempt - 1)
        left = -sigma + jitter
        height = top * (1.0 + jitter)
        path = _rectangle(left, right, height, qp.max_delay)
        turns, min_modulus = _winding(qp.evaluate, path)
        if math.isnan(turns):
            logger.debug(
                f"Contour touches a root (min |q|={min_modulus:.2e}), retry {attempt + 1}"
            )
            continue
        count = int(round(turns))
        if abs(turns - count) > 0.25:
            logger.debug(f"Non-integer winding {turns:.3f}, retry {attempt + 1}")
            continue
        return count
    raise ContourProximityError(sigma, min_modulus, CONTOUR_JITTER_RETRIES)


def rightmost_real_part(
    qp: QuasiPolynomial,
    omega_cap: float = DEFAULT_OMEGA_CAP,
    tol: float = 1e-6,
    floor: float = -64.0,
) -> float:
    """
    Abscissa of the rightmost root, bracketed by bisection on root counts.

    Raises:
        DegenerateError: If no root lies to the right of the floor
    """
    hi = 1.0
    while count_roots_right_of(qp, -hi, omega_cap) > 0:
        hi *= 2.0
    lo = -1.0
    while count_roots_right_of(qp, -lo, omega_cap) == 0:
        lo *= 2.0
        if lo < floor:
            raise DegenerateError(f"no root with real part above {floor}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count_roots_right_of(qp, -mid, omega_cap) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def count_roots_batch(
    base: QuasiPolynomial,
    coeffs: np.ndarray,
    delays: np.ndarray,
    sigma: float,
    omega_cap: float = DEFAULT_OMEGA_CAP,
    chunk: int = BATCH_CHUNK,
) -> np.ndarray:
    """
    Root counts of base(lambda) + coeffs[i] e^(-delays[i] lambda) for many i.

    The base quasi-polynomial is sampled once on a shared contour. Rows whose
    phase increments are ambiguous, or that come close to a root, are
    recounted one by one with count_roots_right_of.

    Returns:
        Integer array of root counts, one per (coeff, delay) pair
    """
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    delays = np.asarray(delays, dtype=float).ravel()
    counts = np.zeros(coeffs.shape, dtype=int)
    if coeffs.size == 0:
        return counts

    worst = float(np.max(np.abs(coeffs) * np.exp(delays * sigma)))
    bound = QuasiPolynomial(base.p1, base.p0, base.exp_terms + ((worst, 0.0),))
    right, top = _contour_box(bound, sigma, omega_cap)
    max_delay = max(base.max_delay, float(np.max(delays)))
    path = _rectangle(-sigma, right, top, max_delay, density=16.0)
    base_values = base.evaluate(path)

    fallback = []
    unique, inverse = np.unique(delays, return_inverse=True)
    table = None
    if unique.size * path.size <= 2 * _BATCH_CELLS:
        table = np.exp(-unique[:, None] * path[None, :])
    step = max(1, min(chunk, _BATCH_CELLS // max(path.size, 1)))
    for start in range(0, coeffs.size, step):
        stop = min(start + step, coeffs.size)
        if table is not None:
            phases = table[inverse[start:stop]]
        else:
            phases = np.exp(-delays[start:stop, None] * path[None, :])
        values = base_values[None, :] + coeffs[start:stop, None] * phases
        modulus_ok = np.min(np.abs(values), axis=1) >= CONTOUR_MIN_MODULUS
        with np.errstate(divide="ignore", invalid="ignore"):
            increments = np.angle(values[:, 1:] / values[:, :-1])
        smooth = np.all(np.abs(increments) <= BATCH_PHASE_LIMIT, axis=1) & modulus_ok
        turns = np.sum(increments, axis=1) / (2.0 * math.pi)
        counts[start:stop] = np.rint(turns).astype(int)
        fallback.extend(int(i) + start for i in np.nonzero(~smooth)[0])

    for i in fallback:
        qp = QuasiPolynomial(
            base.p1, base.p0, base.exp_terms + ((float(coeffs[i]), float(delays[i])),)
        )
        counts[i] = count_roots_right_of(qp, sigma, omega_cap)
    if fallback:
        logger.debug(f"Batch count fell back to exact counting for {len(fallback)} points")
    return counts


def is_sigma_stable(
    qp: QuasiPolynomial, sigma: float, omega_cap: Optional[float] = None
) -> bool:
    """True when no root has Re(lambda) > -sigma."""
    cap = DEFAULT_OMEGA_CAP if omega_cap is None else omega_cap
    return count_roots_right_of(qp, sigma, cap) == 0

"""
Tests for argument-principle root counting
"""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ..errors import DegenerateError
from ..model import ZYMOMONAS_PARAMS, linearize, solve_equilibrium_closed_loop
from ..quasipoly import QuasiPolynomial, closed_loop_quasipolynomial, controller_authority
from ..roots import count_roots_batch, count_roots_right_of, is_sigma_stable, rightmost_real_part


def _quadratic(r1: float, r2: float) -> QuasiPolynomial:
    """(l - r1)(l - r2) without exponential terms"""
    return QuasiPolynomial(p1=-(r1 + r2), p0=r1 * r2)


class TestPolynomialCounts:

    @pytest.mark.parametrize("sigma, expected", [(0.0, 0), (1.5, 1), (3.0, 2)])
    def test_stable_quadratic(self, sigma, expected):
        """Roots -1 and -2 counted against the line Re = -sigma"""
        assert count_roots_right_of(_quadratic(-1.0, -2.0), sigma) == expected

    def test_unstable_quadratic(self):
        assert count_roots_right_of(_quadratic(1.0, -1.0), 0.0) == 1
        assert not is_sigma_stable(_quadratic(1.0, -1.0), 0.0)
        assert is_sigma_stable(_quadratic(-1.0, -2.0), 0.5)

    def test_complex_pair(self):
        """l^2 + 2l + 5 has roots -1 +/- 2i"""
        qp = QuasiPolynomial(p1=2.0, p0=5.0)
        assert count_roots_right_of(qp, 0.5) == 0
        assert count_roots_right_of(qp, 1.5) == 2

    def test_omega_cap_limits_the_count(self):
        qp = QuasiPolynomial(p1=2.0, p0=5.0)
        assert count_roots_right_of(qp, 1.5, omega_cap=1.0) == 0

    @settings(max_examples=40, deadline=None)
    @given(
        r1=st.floats(min_value=-3.0, max_value=3.0),
        r2=st.floats(min_value=-3.0, max_value=3.0),
        sigma=st.floats(min_value=0.0, max_value=2.0),
    )
    def test_count_matches_known_roots(self, r1, r2, sigma):
        assume(abs(r1 + sigma) > 1e-3 and abs(r2 + sigma) > 1e-3)
        expected = int(r1 > -sigma) + int(r2 > -sigma)
        assert count_roots_right_of(_quadratic(r1, r2), sigma) == expected

    def test_rightmost_real_part(self):
        assert rightmost_real_part(_quadratic(-1.0, -2.0)) == pytest.approx(-1.0, abs=1e-5)
        assert rightmost_real_part(QuasiPolynomial(p1=-1.0, p0=5.0)) == pytest.approx(0.5, abs=1e-5)

    def test_rightmost_without_roots_in_range(self):
        with pytest.raises(DegenerateError):
            rightmost_real_part(_quadratic(-100.0, -200.0))


class TestDelayedCounts:

    def setup_method(self):
        """Closed loop at x* = 4.77631 with the state delay raised to 7 h"""
        params = ZYMOMONAS_PARAMS.with_updates(tau=7.0)
        eq = solve_equilibrium_closed_loop(params, 4.77631)
        self.lin = linearize(params, eq, eq.u_star)

    def test_delay_equation_across_first_crossing(self):
        """l^2 + l + e^(-tau l) loses stability near tau = 1.15"""
        qp = QuasiPolynomial(p1=1.0, p0=0.0, exp_terms=((1.0, 1.0),))
        assert count_roots_right_of(qp, 0.0) == 0
        assert count_roots_right_of(qp.with_delays([1.5]), 0.0) == 2

    def test_open_loop_unstable_at_long_delay(self):
        qp = closed_loop_quasipolynomial(self.lin, 0.0, 0.0)
        assert count_roots_right_of(qp, 0.0) == 2

    def test_batch_agrees_with_single_counts(self):
        """Shared-contour batch counting matches one-by-one counting"""
        base = closed_loop_quasipolynomial(self.lin, 0.0, 0.0)
        mu = controller_authority(self.lin)
        gains = [(4.13, 0.031), (2.89, 0.028), (0.5, 0.031), (7.38, 0.031), (7.0, 0.0)]
        hs = np.array([h for h, _ in gains])
        ks = np.array([k for _, k in gains])
        batch = count_roots_batch(base, mu * ks, hs, 0.0)
        single = [
            count_roots_right_of(closed_loop_quasipolynomial(self.lin, k, h), 0.0) for h, k in gains
        ]
        assert batch.tolist() == single

    def test_batch_empty_input(self):
        base = closed_loop_quasipolynomial(self.lin, 0.0, 0.0)
        assert count_roots_batch(base, np.array([]), np.array([]), 0.0).size == 0

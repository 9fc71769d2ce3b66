"""
Tests for quasi-polynomial construction and evaluation
"""

import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ..errors import DomainError, StructureError
from ..model import ZYMOMONAS_PARAMS, linearize, solve_equilibrium_closed_loop
from ..quasipoly import (
    QuasiPolynomial,
    closed_loop_coefficients,
    closed_loop_quasipolynomial,
    controller_authority,
    open_loop_quasipolynomial,
)

PAPER_X_STAR = 4.77631


def _reported_linearizations():
    eq = solve_equilibrium_closed_loop(ZYMOMONAS_PARAMS, PAPER_X_STAR)
    return linearize(ZYMOMONAS_PARAMS, eq, 0.15), linearize(ZYMOMONAS_PARAMS, eq, eq.u_star)


class TestQuasiPolynomial:

    def setup_method(self):
        self.qp = QuasiPolynomial(p1=0.4, p0=0.02, exp_terms=((0.1, 1.8), (-0.05, 0.5)))

    def test_terms_sorted_by_delay(self):
        assert [d for _, d in self.qp.exp_terms] == [0.5, 1.8]
        assert self.qp.max_delay == 1.8

    def test_rejects_negative_delay(self):
        with pytest.raises(DomainError) as exc:
            QuasiPolynomial(1.0, 1.0, ((1.0, -0.1),))
        assert exc.value.condition == "delay_nonnegative"

    def test_kappas_need_single_term(self):
        """Open-loop accessors refuse a two-delay quasi-polynomial"""
        with pytest.raises(StructureError):
            _ = self.qp.kappas
        assert QuasiPolynomial.from_kappas(0.3, 0.02, 0.1, 1.8).kappas == (0.3, 0.02, 0.1)

    def test_evaluate_scalar_and_array(self):
        lam = 0.3 + 0.7j
        expected = lam**2 + 0.4 * lam + 0.02 + 0.1 * cmath.exp(-1.8 * lam) - 0.05 * cmath.exp(-0.5 * lam)
        assert self.qp.evaluate(lam) == pytest.approx(expected)
        values = self.qp.evaluate(np.array([lam, lam]))
        assert values.shape == (2,)
        assert values[1] == pytest.approx(expected)

    def test_derivative_matches_finite_difference(self):
        lam = -0.2 + 1.1j
        step = 1e-6
        numeric = (self.qp.evaluate(lam + step) - self.qp.evaluate(lam - step)) / (2 * step)
        assert self.qp.derivative(lam) == pytest.approx(numeric, rel=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(
        sigma=st.floats(min_value=0.0, max_value=1.0),
        re=st.floats(min_value=-2.0, max_value=2.0),
        im=st.floats(min_value=-3.0, max_value=3.0),
    )
    def test_shift_moves_roots_right(self, sigma, re, im):
        """q_sigma(lambda) = q(lambda - sigma)"""
        lam = complex(re, im)
        shifted = self.qp.shifted(sigma)
        assert shifted.evaluate(lam) == pytest.approx(self.qp.evaluate(lam - sigma), rel=1e-9, abs=1e-9)

    def test_root_radius_bounds_roots(self):
        """Both roots of l^2 - 1 lie inside the radius"""
        qp = QuasiPolynomial(p1=0.0, p0=-1.0)
        assert qp.root_radius() >= 1.0

    def test_with_delays(self):
        changed = self.qp.with_delays([0.7, 2.0])
        assert [d for _, d in changed.exp_terms] == [0.7, 2.0]
        with pytest.raises(StructureError):
            self.qp.with_delays([1.0])


class TestCharacteristicQuasiPolynomials:

    def setup_method(self):
        self.lin_open, self.lin_closed = _reported_linearizations()

    def test_open_loop_kappas(self):
        """Open-loop coefficients at the reported operating point"""
        k1, k2, k3 = open_loop_quasipolynomial(self.lin_open).kappas
        assert k1 == pytest.approx(0.379855, abs=1e-5)
        assert k2 == pytest.approx(0.020115, abs=1e-5)
        assert k3 == pytest.approx(0.097912, abs=1e-5)
        assert open_loop_quasipolynomial(self.lin_open).max_delay == 1.8

    def test_closed_loop_coefficients(self):
        eta1, eta2, eta3, mu = closed_loop_coefficients(self.lin_closed)
        assert eta1 == pytest.approx(0.378319, abs=1e-5)
        assert eta2 == pytest.approx(0.020016, abs=1e-5)
        assert eta3 == pytest.approx(0.097910, abs=1e-5)
        assert mu == pytest.approx(-2.88458, abs=1e-4)
        assert controller_authority(self.lin_closed) == mu

    def test_zero_gain_reduces_to_open_loop(self):
        """Without feedback the controller term disappears"""
        closed = closed_loop_quasipolynomial(self.lin_closed, 0.0, 3.0)
        assert closed == open_loop_quasipolynomial(self.lin_closed)

    def test_rejects_negative_controller_delay(self):
        with pytest.raises(DomainError):
            closed_loop_quasipolynomial(self.lin_closed, 0.031, -1.0)

    @settings(max_examples=40, deadline=None)
    @given(
        k_r=st.floats(min_value=-0.2, max_value=0.2),
        h=st.floats(min_value=0.0, max_value=10.0),
        re=st.floats(min_value=-1.0, max_value=1.0),
        im=st.floats(min_value=-2.0, max_value=2.0),
    )
    def test_matches_determinant(self, k_r, h, re, im):
        """q(lambda) = det(lambda I - A0 - A1 e^(-tau lambda) - B K e^(-h lambda))"""
        lin = self.lin_closed
        lam = complex(re, im)
        K = np.array([0.0, k_r])
        matrix = (
            lam * np.eye(2)
            - lin.A0
            - lin.A1 * cmath.exp(-lin.state_delay * lam)
            - np.outer(lin.B, K) * cmath.exp(-h * lam)
        )
        expected = np.linalg.det(matrix)
        qp = closed_loop_quasipolynomial(lin, k_r, h)
        assert qp.evaluate(lam) == pytest.approx(expected, rel=1e-9, abs=1e-12)

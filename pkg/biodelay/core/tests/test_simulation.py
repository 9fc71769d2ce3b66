"""
Tests for control laws, method-of-steps integration and decay estimation
"""

import numpy as np
import pytest

from ..errors import DegenerateError, DomainError, SimulationBlowUpError, StepSizeError
from ..model import (
    ZYMOMONAS_DILUTION,
    ZYMOMONAS_PARAMS,
    EquilibriumPoint,
    ModelParams,
    linearize,
    solve_equilibrium_open_loop,
    solve_equilibrium_proportional,
)
from ..quasipoly import closed_loop_quasipolynomial, open_loop_quasipolynomial
from ..roots import rightmost_real_part
from ..simulation import (
    ConstantControl,
    ControlLaw,
    DelayedProportionalControl,
    HistorySpec,
    ProportionalControl,
    ScheduledControl,
    Trajectory,
    decay_estimate,
    simulate,
)
from ..stability import stability_window

GAIN = 0.031
SWITCH_TIME = 500.0


def _open_loop_equilibrium() -> EquilibriumPoint:
    return solve_equilibrium_open_loop(ZYMOMONAS_PARAMS, ZYMOMONAS_DILUTION)[-1]


def _peak_to_peak(traj: Trajectory, t0: float, t1: float) -> float:
    window = (traj.times >= t0) & (traj.times <= t1)
    return float(np.ptp(traj.x[window]))


class TestControlLaws:

    def test_constant_range(self):
        assert ConstantControl(0.15).level(3.0, 4.0, lambda t: 0.0) == 0.15
        with pytest.raises(DomainError):
            ConstantControl(1.5)

    def test_delayed_proportional_reads_history(self):
        law = DelayedProportionalControl(k_r=0.5, h=2.0)
        assert law.level(5.0, 1.0, lambda t: t) == pytest.approx(1.5)
        assert law.delays == (2.0,)

    def test_zero_delay_uses_current_biomass(self):
        law = DelayedProportionalControl(k_r=0.5, h=0.0)
        assert law.level(5.0, 4.0, lambda t: 100.0) == pytest.approx(2.0)

    def test_rejects_negative_controller_delay(self):
        with pytest.raises(DomainError):
            DelayedProportionalControl(k_r=0.1, h=-1.0)

    def test_scheduled_switches_at_time(self):
        law = ScheduledControl(ConstantControl(0.15), ProportionalControl(0.1), switch_time=10.0)
        assert law.level(9.99, 2.0, lambda t: 0.0) == 0.15
        assert law.level(10.0, 2.0, lambda t: 0.0) == pytest.approx(0.2)

    def test_scheduled_nesting_limit(self):
        """Scheduled laws nest at most two levels"""
        inner = ScheduledControl(ConstantControl(0.1), ConstantControl(0.2), switch_time=1.0)
        assert inner.depth == 2
        with pytest.raises(DomainError) as exc:
            ScheduledControl(inner, ConstantControl(0.3), switch_time=2.0)
        assert exc.value.condition == "nesting_depth"

    def test_rejects_nonpositive_switch(self):
        with pytest.raises(DomainError):
            ScheduledControl(ConstantControl(0.1), ConstantControl(0.2), switch_time=0.0)

    def test_dict_round_trip(self):
        law = ScheduledControl(
            ConstantControl(0.15), DelayedProportionalControl(k_r=GAIN, h=7.38), SWITCH_TIME
        )
        assert ControlLaw.from_dict(law.to_dict()) == law

    def test_from_dict_errors(self):
        with pytest.raises(DomainError) as exc:
            ControlLaw.from_dict({"type": "bang_bang"})
        assert exc.value.condition == "control_type"
        with pytest.raises(DomainError) as exc:
            ControlLaw.from_dict({"type": "delayed_proportional", "k_r": 0.1})
        assert exc.value.condition == "control_fields"


class TestTrajectory:

    def setup_method(self):
        """Exact cubic samples s = t^3, x = 1 + t^2"""
        self.times = np.linspace(0.0, 2.0, 5)
        self.traj = Trajectory(
            times=self.times,
            s=self.times**3,
            x=1.0 + self.times**2,
            u=np.zeros(5),
            ds=3.0 * self.times**2,
            dx=2.0 * self.times,
        )

    def test_interpolation_reproduces_cubics(self):
        s, x = self.traj.interpolate(np.array([0.1, 0.77, 1.9]))
        np.testing.assert_allclose(s, [0.001, 0.77**3, 1.9**3], rtol=1e-12)
        np.testing.assert_allclose(x, [1.01, 1.0 + 0.77**2, 1.0 + 1.9**2], rtol=1e-12)

    def test_interpolation_scalar_and_nodes(self):
        s, x = self.traj.interpolate(1.5)
        assert isinstance(s, float)
        assert s == pytest.approx(3.375)
        assert self.traj.interpolate(2.0) == pytest.approx((8.0, 5.0))

    def test_interpolation_outside_span(self):
        with pytest.raises(DomainError):
            self.traj.interpolate(2.5)

    def test_segment_coefficients(self):
        """(t_k + r)^3 = t_k^3 + 3 t_k^2 r + 3 t_k r^2 + r^3"""
        coefficients = self.traj.segment_coefficients()
        assert coefficients["s"].shape == (4, 4)
        t_k = self.times[2]
        np.testing.assert_allclose(coefficients["s"][2], [t_k**3, 3 * t_k**2, 3 * t_k, 1.0], atol=1e-12)
        np.testing.assert_allclose(coefficients["x"][2], [1 + t_k**2, 2 * t_k, 1.0, 0.0], atol=1e-12)

    def test_rejects_unsorted_times(self):
        with pytest.raises(DomainError):
            Trajectory.from_samples(np.array([0.0, 2.0, 1.0]), np.zeros(3), np.zeros(3))

    def test_arrays_are_read_only(self):
        with pytest.raises(ValueError):
            self.traj.x[0] = 5.0


class TestSimulate:

    def test_equilibrium_is_preserved(self):
        """Starting at rest with the matching input stays at rest"""
        eq = _open_loop_equilibrium()
        traj = simulate(
            ZYMOMONAS_PARAMS,
            ConstantControl(ZYMOMONAS_DILUTION),
            HistorySpec(eq.s_star, eq.x_star),
            t_f=20.0,
            dt=0.05,
        )
        assert np.max(traj.deviation_norm(eq)) < 1e-9
        assert traj.clamp_events == {"control": 0, "state": 0}

    def test_grid(self):
        traj = simulate(
            ZYMOMONAS_PARAMS, ConstantControl(0.15), HistorySpec(10.0, 0.1), t_f=1.0, dt=0.1
        )
        assert len(traj.times) == 11
        assert traj.t_final == pytest.approx(1.0)
        assert traj.s[0] == 10.0
        assert traj.x[0] == 0.1

    def test_step_too_coarse_for_state_delay(self):
        with pytest.raises(StepSizeError):
            simulate(ZYMOMONAS_PARAMS, ConstantControl(0.15), HistorySpec(10.0, 0.1), 10.0, dt=0.5)

    def test_step_too_coarse_for_controller_delay(self):
        law = DelayedProportionalControl(k_r=GAIN, h=0.1)
        with pytest.raises(StepSizeError):
            simulate(ZYMOMONAS_PARAMS, law, HistorySpec(10.0, 0.1), 10.0, dt=0.05)

    def test_nonpositive_step(self):
        with pytest.raises(StepSizeError):
            simulate(ZYMOMONAS_PARAMS, ConstantControl(0.15), HistorySpec(10.0, 0.1), 10.0, dt=0.0)

    def test_rejects_negative_history(self):
        with pytest.raises(DomainError):
            HistorySpec(s_init=-1.0, x_init=0.1)

    def test_input_is_clamped(self, caplog):
        """A saturating proportional law never drives u outside [0, 1]"""
        traj = simulate(
            ZYMOMONAS_PARAMS, ProportionalControl(k_r=1.0), HistorySpec(5.0, 4.0), 5.0, dt=0.05
        )
        assert traj.u.max() <= 1.0
        assert traj.u.min() >= 0.0
        assert traj.control_clamps > 0
        assert "Clamp events" in caplog.text

    def test_blow_up(self):
        """Quadratic growth from a huge biomass overflows on the first step"""
        params = ModelParams(
            a=0.01, b=0.01, c=5.0, d=0.01, e=0.2, alpha=2.0, beta=0.27, s0=10.0, tau=0.0
        )
        with pytest.raises(SimulationBlowUpError) as exc:
            simulate(params, ConstantControl(1.0), HistorySpec(10.0, 1e100), t_f=10.0, dt=0.01)
        assert exc.value.last_time < 10.0

    @pytest.mark.parametrize("tau", [1.0, 2.0, 3.0, 4.0])
    def test_short_delays_converge(self, tau):
        """Inside the stability window the batch settles at the open-loop equilibrium"""
        eq = _open_loop_equilibrium()
        traj = simulate(
            ZYMOMONAS_PARAMS.with_updates(tau=tau),
            ConstantControl(ZYMOMONAS_DILUTION),
            HistorySpec(1.85, 4.9),
            t_f=400.0,
            dt=0.05,
        )
        assert traj.s[-1] == pytest.approx(eq.s_star, rel=5e-3)
        assert traj.x[-1] == pytest.approx(eq.x_star, rel=5e-3)

    def test_fourth_order_convergence(self):
        """Halving dt shrinks the error about sixteenfold when dt divides tau"""

        def final_state(dt):
            traj = simulate(
                ZYMOMONAS_PARAMS,
                ConstantControl(ZYMOMONAS_DILUTION),
                HistorySpec(1.85, 4.9),
                t_f=20.0,
                dt=dt,
            )
            return np.array([traj.s[-1], traj.x[-1]])

        reference = final_state(0.0125)
        coarse = np.linalg.norm(final_state(0.2) - reference)
        fine = np.linalg.norm(final_state(0.1) - reference)
        assert np.log2(coarse / fine) >= 3.5

    def test_long_delay_diverges(self):
        eq = _open_loop_equilibrium()
        traj = simulate(
            ZYMOMONAS_PARAMS.with_updates(tau=7.0),
            ConstantControl(ZYMOMONAS_DILUTION),
            HistorySpec(1.85, 4.9),
            t_f=400.0,
            dt=0.05,
        )
        deviation = traj.deviation_norm(eq)
        late = traj.times >= 300.0
        assert deviation[late].max() > 10 * deviation[0]

    def test_zero_controller_delay_matches_proportional(self):
        hist = HistorySpec(1.85, 4.9)
        params = ZYMOMONAS_PARAMS.with_updates(tau=7.0)
        delayed = simulate(params, DelayedProportionalControl(k_r=GAIN, h=0.0), hist, 100.0, 0.05)
        direct = simulate(params, ProportionalControl(k_r=GAIN), hist, 100.0, 0.05)
        np.testing.assert_allclose(delayed.s, direct.s, rtol=0, atol=1e-9)
        np.testing.assert_allclose(delayed.x, direct.x, rtol=0, atol=1e-9)
        np.testing.assert_allclose(delayed.u, direct.u, rtol=0, atol=1e-9)

    def test_washed_out_biomass_stays_zero(self):
        """Without biomass only the dilution term moves the substrate"""
        traj = simulate(
            ZYMOMONAS_PARAMS, ConstantControl(ZYMOMONAS_DILUTION), HistorySpec(2.0, 0.0), 50.0, 0.05
        )
        assert np.all(traj.x == 0.0)
        assert np.all(np.diff(traj.s) > 0)
        assert traj.s[-1] < ZYMOMONAS_PARAMS.s0

    def test_long_run_stays_nonnegative(self):
        traj = simulate(
            ZYMOMONAS_PARAMS.with_updates(tau=7.0),
            ConstantControl(ZYMOMONAS_DILUTION),
            HistorySpec(1.85, 4.9),
            t_f=1000.0,
            dt=0.05,
        )
        assert np.all(np.isfinite(traj.s)) and np.all(np.isfinite(traj.x))
        assert traj.s.min() >= 0.0
        assert traj.x.min() >= 0.0
        assert traj.x.max() < 20.0

    @pytest.mark.slow
    def test_sustained_oscillation_at_critical_delay(self):
        """At the first critical delay the oscillation neither grows nor fades"""
        eq = _open_loop_equilibrium()
        lin = linearize(ZYMOMONAS_PARAMS, eq, ZYMOMONAS_DILUTION)
        tau0 = stability_window(open_loop_quasipolynomial(lin)).upper
        assert tau0 == pytest.approx(4.9125, abs=1e-2)
        traj = simulate(
            ZYMOMONAS_PARAMS.with_updates(tau=tau0),
            ConstantControl(ZYMOMONAS_DILUTION),
            HistorySpec(eq.s_star, eq.x_star + 0.05),
            t_f=600.0,
            dt=0.05,
        )
        first = _peak_to_peak(traj, 200.0, 400.0)
        second = _peak_to_peak(traj, 400.0, 600.0)
        assert first > 0.01
        assert abs(second - first) / first < 0.1


class TestDelayedControl:
    """Delayed proportional control of the long-delay loop, switched on at t = 500"""

    def setup_method(self):
        self.params = ZYMOMONAS_PARAMS.with_updates(tau=7.0)
        self.eq = max(solve_equilibrium_proportional(self.params, GAIN), key=lambda p: p.x_star)

    def _run(self, h: float) -> Trajectory:
        law = ScheduledControl(
            ConstantControl(ZYMOMONAS_DILUTION),
            DelayedProportionalControl(k_r=GAIN, h=h),
            SWITCH_TIME,
        )
        return simulate(self.params, law, HistorySpec(1.94, 4.77), t_f=1000.0, dt=0.05)

    @pytest.mark.slow
    def test_marginal_gain_stays_bounded(self):
        traj = self._run(2.89)
        assert np.all(np.isfinite(traj.x))
        assert traj.u.min() >= 0.0
        assert traj.u.max() <= 1.0

    @pytest.mark.slow
    def test_moderate_controller_delay(self):
        rate = decay_estimate(self._run(4.13), self.eq, (650.0, 1000.0))
        assert rate >= 0.016

    @pytest.mark.slow
    def test_longer_controller_delay(self):
        rate = decay_estimate(self._run(5.58), self.eq, (600.0, 750.0))
        assert rate >= 0.04

    @pytest.mark.slow
    def test_fastest_decay_matches_linear_prediction(self):
        """Nonlinear decay near the collapse gain tracks the rightmost root"""
        lin = linearize(self.params, self.eq, self.eq.u_star)
        predicted = -rightmost_real_part(closed_loop_quasipolynomial(lin, GAIN, 7.38))
        rate = decay_estimate(self._run(7.38), self.eq, (600.0, 680.0))
        assert predicted > 0
        assert rate >= 0.8 * predicted


class TestDecayEstimate:

    def setup_method(self):
        self.eq = EquilibriumPoint(s_star=2.0, x_star=5.0)
        self.times = np.linspace(0.0, 60.0, 6001)

    def test_monotone_decay(self):
        """z' = -0.1 z recovers a rate of 0.1"""
        deviation = np.exp(-0.1 * self.times)
        traj = Trajectory.from_samples(self.times, 2.0 + deviation, np.full_like(self.times, 5.0))
        assert decay_estimate(traj, self.eq, (5.0, 50.0)) == pytest.approx(0.1, rel=1e-6)

    def test_oscillating_decay(self):
        deviation = np.exp(-0.05 * self.times) * np.cos(self.times)
        traj = Trajectory.from_samples(self.times, 2.0 + deviation, np.full_like(self.times, 5.0))
        assert decay_estimate(traj, self.eq, (0.0, 60.0)) == pytest.approx(0.05, rel=1e-2)

    def test_growth_gives_negative_rate(self):
        deviation = 1e-3 * np.exp(0.02 * self.times) * np.sin(self.times)
        traj = Trajectory.from_samples(self.times, 2.0 + deviation, np.full_like(self.times, 5.0))
        assert decay_estimate(traj, self.eq, (0.0, 60.0)) < 0

    def test_too_few_peaks(self):
        """Growth without oscillation has no envelope"""
        deviation = 1e-3 * np.exp(0.02 * self.times)
        traj = Trajectory.from_samples(self.times, 2.0 + deviation, np.full_like(self.times, 5.0))
        with pytest.raises(DegenerateError):
            decay_estimate(traj, self.eq, (0.0, 60.0))

    def test_at_rest_is_degenerate(self):
        traj = Trajectory.from_samples(
            self.times, np.full_like(self.times, 2.0), np.full_like(self.times, 5.0)
        )
        with pytest.raises(DegenerateError):
            decay_estimate(traj, self.eq, (0.0, 60.0))

    def test_window_outside_span(self):
        traj = Trajectory.from_samples(
            self.times, np.full_like(self.times, 2.0), np.full_like(self.times, 5.0)
        )
        with pytest.raises(DomainError):
            decay_estimate(traj, self.eq, (10.0, 100.0))

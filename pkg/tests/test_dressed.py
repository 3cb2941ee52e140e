import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpo.dressed import (PopulationState, dressed_coordinates, dressed_derivative,
                         dressed_populations, eigen_frame, integrate_dressed,
                         integrate_reduced, limit_coordinates, liouvillian_parts,
                         reduced_rhs, reduced_steady_state, stationary_solution,
                         strong_field_derivative, write_dressed_csv)
from cpo.errors import DegenerateFrameError, ParameterError
from cpo.master import full_steady_state
from cpo.params import SystemParams, with_saturation

SQ2 = math.sqrt(2.0)


def params(S=1.0, **kw):
    base = dict(gamma=1.0, epsilon=0.5, Gamma_coh=1000.0, omega0=0.0, omega1=0.0,
                omega2=-1.0, n1_eq=0.8, n0_eq=0.2, Omega1=1.0, Omega2=1.0)
    base.update(kw)
    return with_saturation(SystemParams(**base), S)


def amplitude_at(x, t, delta):
    return 2 * abs(np.mean(x * np.exp(-1j * delta * t)))


def periodic_tail(traj, samples):
    tail = traj.t >= traj.transient_end
    t = traj.t[tail]
    n = (len(t) - 1) // samples * samples
    return tail, t[:n], n


class TestReduced:
    def test_undriven_decay(self):
        p = params(S=0.0)
        traj = integrate_reduced(p, PopulationState(0.1, 0.6), t_end=5.0, tol=1e-11)
        t = traj.t
        np.testing.assert_allclose(traj.column("n1"), 0.8 - 0.7 * np.exp(-1.5 * t), atol=1e-9)
        np.testing.assert_allclose(traj.column("n0"), 0.2 + 0.4 * np.exp(-0.5 * t), atol=1e-9)

    def test_closed_sum_constant(self):
        p = params(S=3.0, epsilon=0.0, omega2=-2.0)
        traj = integrate_reduced(p, PopulationState(0.3, 0.7), t_end=10.0, tol=1e-10)
        total = traj.column("n1") + traj.column("n0")
        assert np.max(np.abs(total - 1.0)) < 1e-12

    def test_matches_full_model(self, cross_params):
        full, _ = full_steady_state(cross_params, tol=1e-9)
        red, _ = reduced_steady_state(cross_params, tol=1e-9)
        assert red == pytest.approx(full, rel=0.03)

    def test_nonadiabatic_warning(self):
        p = params(S=1.0, Gamma_coh=3.0, omega2=-2.0)
        with pytest.warns(UserWarning, match="adiabatic"):
            integrate_reduced(p, t_end=1.0)

    def test_adiabatic_no_warning(self, cross_params):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            integrate_reduced(cross_params, t_end=1.0)

    def test_rejects_unphysical_initial(self):
        with pytest.raises(ParameterError):
            integrate_reduced(params(), PopulationState(1.1, 0.0), t_end=1.0)


class TestLiouvillian:
    def test_identity_when_undriven_and_symmetric(self):
        L0, L1, src = liouvillian_parts(params(S=0.0, epsilon=0.0), 0.3)
        np.testing.assert_array_equal(L0, np.eye(2))
        np.testing.assert_array_equal(L1, np.zeros((2, 2)))
        np.testing.assert_allclose(src, [0.8, 0.2])

    @given(st.floats(0, 100), st.floats(-50, 50))
    def test_drive_part_is_singular(self, S, t):
        _, L1, _ = liouvillian_parts(params(), t, S=S)
        assert abs(np.linalg.det(L1)) <= 1e-12 * max(1.0, S * S)

    def test_reproduces_reduced_rhs(self, rng):
        for _ in range(50):
            S, eps = rng.uniform(0, 20), rng.uniform(-0.95, 0.95)
            gamma = rng.uniform(0.1, 3.0)
            p = params(S=S, epsilon=eps, gamma=gamma, omega2=-rng.uniform(0.1, 5))
            t, n = rng.uniform(0, 30), rng.uniform(0, 1, 2)
            L0, L1, src = liouvillian_parts(p, t)
            expected = gamma * (-(L0 + L1) @ n + src)
            np.testing.assert_allclose(reduced_rhs(p)(t, n), expected, rtol=1e-12, atol=1e-12)


class TestStationary:
    def test_undriven(self):
        n = stationary_solution(params(S=0.0))
        assert (n.n1, n.n0) == (0.8, 0.2)

    def test_example(self):
        n = stationary_solution(params(S=1.0, epsilon=0.0, n1_eq=1.0, n0_eq=0.0))
        assert n.n1 == pytest.approx(2 / 3, rel=1e-15)
        assert n.n0 == pytest.approx(1 / 3, rel=1e-15)

    def test_saturation_limit(self):
        n = stationary_solution(params(epsilon=0.0), S=1e9)
        assert n.n1 == pytest.approx(0.5, abs=1e-9) and n.n0 == pytest.approx(0.5, abs=1e-9)

    @given(st.floats(0, 1e3), st.floats(-0.99, 0.99))
    def test_fixed_point(self, S, eps):
        p = params(epsilon=eps)
        n = stationary_solution(p, S=S).as_vector()
        L0, _, src = liouvillian_parts(p, 0.0, S=S)
        assert np.max(np.abs(L0 @ n - src)) <= 1e-12 * max(1.0, S)


class TestEigenFrame:
    def test_symmetric_example(self):
        f = eigen_frame(params(epsilon=0.0), S=2.0)
        assert f.lambda0 == pytest.approx(1.0, rel=1e-15)
        assert f.lambda1 == pytest.approx(5.0, rel=1e-15)
        assert f.theta == pytest.approx(math.pi / 4, rel=1e-15)

    def test_pythagorean_example(self):
        f = eigen_frame(params(epsilon=0.6), S=0.8)
        assert f.lambda0 == pytest.approx(0.8, rel=1e-14)
        assert f.lambda1 == pytest.approx(2.8, rel=1e-15)

    @given(st.floats(1e-6, 1e6), st.floats(-0.999, 0.999))
    def test_trace_determinant_and_diagonalisation(self, S, eps):
        p = params(epsilon=eps)
        f = eigen_frame(p, S=S)
        assert f.lambda0 * f.lambda1 == pytest.approx(1 + 2 * S - eps * eps, rel=1e-12)
        assert f.lambda0 + f.lambda1 == pytest.approx(2 * (1 + S), rel=1e-12)
        assert 0 < f.lambda0 <= 1 <= f.lambda1
        assert 0 < f.theta < math.pi / 2
        L0, _, _ = liouvillian_parts(p, 0.0, S=S)
        U = f.rotation
        resid = L0 @ U - U @ np.diag([f.lambda1, f.lambda0])
        assert np.max(np.abs(resid)) <= 1e-12 * max(1.0, S)

    def test_printed_mixing_angle(self):
        for S, eps in ((0.3, 0.5), (5.0, 0.85), (2.0, -0.4)):
            f = eigen_frame(params(epsilon=eps), S=S)
            r = eps / S
            assert math.tan(f.theta) == pytest.approx(math.sqrt(1 + r * r) - r, rel=1e-12)

    def test_strong_drive_limits(self):
        thetas, lams = [], []
        for S in (1.0, 10.0, 100.0, 1e4):
            f = eigen_frame(params(epsilon=0.5), S=S)
            thetas.append(f.theta)
            lams.append(f.lambda0)
        assert np.all(np.diff(thetas) > 0) and np.all(np.diff(lams) > 0)
        assert thetas[-1] == pytest.approx(math.pi / 4, abs=1e-4)
        assert lams[-1] == pytest.approx(1.0, abs=1e-4)

    def test_zero_drive(self):
        f = eigen_frame(params(epsilon=0.5), S=0.0)
        assert f.degenerate_mixing and f.theta == 0.0
        assert (f.lambda0, f.lambda1) == pytest.approx((0.5, 1.5))
        g = eigen_frame(params(epsilon=-0.5), S=0.0)
        assert g.degenerate_mixing and g.theta == pytest.approx(math.pi / 2)

    def test_fully_degenerate(self):
        with pytest.raises(DegenerateFrameError):
            eigen_frame(params(epsilon=0.0), S=0.0)

    def test_eta_bar(self):
        f = eigen_frame(params(epsilon=0.3), S=2.0)
        np.testing.assert_allclose(f.eta_bar, f.rotation.T @ f.n_bar, rtol=1e-15)


class TestCoordinates:
    def test_stationary_point_is_origin(self):
        p = params(S=3.0)
        f = eigen_frame(p)
        assert dressed_coordinates(stationary_solution(p), f) == pytest.approx((0, 0), abs=1e-16)

    def test_quarter_turn(self):
        p = params(epsilon=0.0)
        f = eigen_frame(p, S=2.0)
        d1, d0 = 0.1, -0.3
        eta = dressed_coordinates(f.n_bar + np.array([d1, d0]), f)
        assert eta == pytest.approx(((d1 - d0) / SQ2, (d1 + d0) / SQ2), rel=1e-14)

    @given(st.floats(0.01, 100), st.floats(-0.9, 0.9), st.floats(0, 1), st.floats(0, 1))
    def test_norm_preserved(self, S, eps, a, b):
        f = eigen_frame(params(epsilon=eps), S=S)
        eta = dressed_coordinates(PopulationState(a, b), f)
        dev = np.array([a, b]) - f.n_bar
        assert math.hypot(*eta) == pytest.approx(math.hypot(*dev), rel=1e-12, abs=1e-15)


class TestDressedDynamics:
    def test_free_decay_without_beat(self):
        p = params(S=2.5, epsilon=0.4, omega2=-3.0)
        f = eigen_frame(p)
        traj = integrate_dressed(p, (0.2, -0.1), t_end=3.0, tol=1e-11, drive=False)
        np.testing.assert_allclose(traj.column("eta1"), 0.2 * np.exp(-f.lambda1 * traj.t),
                                   atol=1e-10)
        np.testing.assert_allclose(traj.column("eta0"), -0.1 * np.exp(-f.lambda0 * traj.t),
                                   atol=1e-10)

    def test_derivative_matches_rotated_reduced(self, rng):
        for _ in range(30):
            p = params(S=rng.uniform(0.01, 50), epsilon=rng.uniform(-0.9, 0.9),
                       gamma=rng.uniform(0.2, 2), omega2=-rng.uniform(0.1, 4))
            f = eigen_frame(p)
            n, t = rng.uniform(0, 1, 2), rng.uniform(0, 20)
            eta = np.array(dressed_coordinates(n, f))
            expected = f.rotation.T @ reduced_rhs(p)(t, n)
            np.testing.assert_allclose(dressed_derivative(eta, t, p, f), expected,
                                       rtol=1e-11, atol=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.05, 30), st.floats(-0.9, 0.9), st.floats(0.2, 5))
    def test_equivalent_to_reduced(self, S, eps, delta):
        tol = 1e-9
        p = params(S=S, epsilon=eps, omega2=-delta)
        red = integrate_reduced(p, t_end=10.0, tol=tol)
        dre = integrate_dressed(p, t_end=10.0, tol=tol)
        n1, n0 = dressed_populations(dre)
        dev = max(np.max(np.abs(n1 - red.column("n1"))), np.max(np.abs(n0 - red.column("n0"))))
        assert dev < 10 * tol

    def test_strong_field_amplitude_ratio_at_unit_beat(self):
        # S=50, eps=0.5, delta=gamma: the slow coordinate should barely oscillate
        p = params(S=50.0, epsilon=0.5, omega2=-1.0)
        traj = integrate_dressed(p, tol=1e-10)
        tail = traj.t >= traj.transient_end
        ratio = np.ptp(traj.column("eta0")[tail]) / np.ptp(traj.column("eta1")[tail])
        assert ratio < 0.1, f"eta0/eta1 oscillation ratio {ratio:.3f}"

    @pytest.mark.parametrize("eps, delta", [(0.5, 1.0), (0.2, 1.0), (0.5, 4.0)])
    def test_slow_coordinate_filters_fast_one(self, eps, delta):
        # in the strong-field limit eta0' = -gamma (eta0 + eps eta1), a first-order
        # low-pass, so the fundamental ratio is eps / sqrt(1 + (delta/gamma)^2)
        p = params(S=200.0, epsilon=eps, omega2=-delta)
        traj = integrate_dressed(p, tol=1e-9, samples_per_period=128)
        tail, t, n = periodic_tail(traj, 128)
        a1 = amplitude_at(traj.column("eta1")[tail][:n], t, delta)
        a0 = amplitude_at(traj.column("eta0")[tail][:n], t, delta)
        assert a0 / a1 == pytest.approx(eps / math.sqrt(1 + delta**2), rel=0.01)

    def test_csv(self, tmp_path):
        p = params(S=2.0)
        traj = integrate_dressed(p, t_end=1.0)
        path = tmp_path / "d.csv"
        write_dressed_csv(traj, path)
        rows = path.read_text().splitlines()
        assert rows[0] == "t,eta1,eta0,n1,n0"
        first = [float(v) for v in rows[1].split(",")]
        assert first[3:] == pytest.approx([0.8, 0.2], abs=1e-15)


class TestStrongField:
    def test_symmetric_slow_decay(self):
        p = params(S=10.0, epsilon=0.0, n1_eq=0.5, n0_eq=0.5)
        assert strong_field_derivative((0.0, 0.3), 0.7, p)[1] == pytest.approx(-0.3)

    def test_rest_point(self):
        p = params(S=10.0, n1_eq=0.5, n0_eq=0.5)
        np.testing.assert_array_equal(strong_field_derivative((0.0, 0.0), 1.3, p), [0.0, 0.0])

    def test_exact_in_limit_coordinates(self, rng):
        for _ in range(20):
            p = params(S=rng.uniform(0.1, 100), epsilon=rng.uniform(-0.9, 0.9),
                       omega2=-rng.uniform(0.1, 3))
            n, t = rng.uniform(0, 1, 2), rng.uniform(0, 10)
            J = np.array([[1, -1], [1, 1]]) / SQ2
            np.testing.assert_allclose(strong_field_derivative(limit_coordinates(n, p), t, p),
                                       J @ reduced_rhs(p)(t, n), rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("S", [100.0, 1000.0])
    def test_converges_to_dressed_equations(self, S, rng):
        p = params(S=S, epsilon=0.5, omega2=-1.0)
        f = eigen_frame(p)
        worst = 0.0
        for _ in range(200):
            n, t = rng.uniform(0, 1, 2), rng.uniform(0, 20)
            d9 = dressed_derivative(np.array(dressed_coordinates(n, f)), t, p, f)
            d10 = strong_field_derivative(limit_coordinates(n, p), t, p)
            worst = max(worst, np.max(np.abs(d9 - d10)) / np.max(np.abs(d10)))
        assert worst < 5 / S

    def test_dressed_limit_monotone(self, rng):
        states = rng.uniform(0, 1, (50, 2))
        errors = []
        for S in (10.0, 100.0, 1000.0):
            p = params(S=S, epsilon=0.5)
            f = eigen_frame(p)
            errors.append(max(
                np.max(np.abs(np.subtract(dressed_coordinates(n, f), limit_coordinates(n, p))))
                for n in states))
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-3


class TestRegimes:
    def test_fast_beat_slow_coordinate_quiet(self):
        # Gamma >> delta >> gamma with delta comparable to the fast rate 1 + 2S
        p = params(S=50.0, epsilon=0.5, Gamma_coh=1e4, omega2=-100.0)
        traj = integrate_dressed(p, tol=1e-10)
        tail = traj.t >= traj.transient_end
        ratio = np.ptp(traj.column("eta0")[tail]) / np.ptp(traj.column("eta1")[tail])
        assert ratio < 0.01

    @pytest.mark.parametrize("S", [2.0, 5.0])
    def test_beat_near_coherence_rate_small_asymmetry(self, S):
        p = params(S=S, epsilon=0.2, Gamma_coh=20.0, omega2=-20.0)
        diff, _ = full_steady_state(p, tol=1e-8)
        assert diff / SQ2 == pytest.approx(0.6 / (1 + 2 * S) / SQ2, rel=0.10)

    @pytest.mark.parametrize("S", [2.0, 5.0])
    def test_beat_near_coherence_rate_asymmetric(self, S):
        # with eps = 0.5 the asymmetric reservoir contributes (1 - eps^2)/(1 + 2S - eps^2)
        p = params(S=S, epsilon=0.5, Gamma_coh=20.0, omega2=-20.0)
        diff, _ = full_steady_state(p, tol=1e-8)
        target = 0.6 * (1 - 0.25) / (1 + 2 * S - 0.25)
        assert diff == pytest.approx(target, rel=0.10)

import numpy as np
import pytest

from fluorcorr import correlations, oracle
from fluorcorr.correlations import (
    DensityMatrix,
    asymmetry_ratio,
    dephasing_lineshape_scan,
    dephasing_summary,
    filtered_g2,
    filtered_g2_at_epsilon,
    g2_homodyned,
    incoherent_density,
    richardson,
    spectral_peaks,
    spectrum,
    steady_state,
    two_time,
)
from fluorcorr.errors import EpsilonNotConverged, InvalidParams, NegativeDelay, ZeroIntensity
from fluorcorr.model import SIGMA_MINUS, SensorParams, SystemParams, build_system_liouvillian
from fluorcorr.qmatrix import dag

SP = dag(SIGMA_MINUS)
N = SP @ SIGMA_MINUS


def bare(p):
    l = build_system_liouvillian(p)
    return l, steady_state(l)


class TestSteadyState:
    @pytest.mark.parametrize("p", [SystemParams(), SystemParams(omega_drive=3.0, delta=-2.0, gamma_phi=0.5)])
    def test_density_matrix_invariants(self, p):
        l, rho = bare(p)
        m = rho.matrix
        assert np.abs(m - dag(m)).max() < 1e-12
        assert abs(np.trace(m) - 1) < 1e-12
        assert np.linalg.eigvalsh(m).min() > -1e-10
        assert np.abs(l.apply(m)).max() < 1e-10

    def test_infinite_drive_limit(self):
        _, rho = bare(SystemParams(omega_drive=50.0, delta=0.0))
        np.testing.assert_allclose(np.diag(rho.matrix).real, [0.5, 0.5], atol=1e-4)

    def test_expect(self):
        _, rho = bare(SystemParams(omega_drive=0.0))
        assert rho.expect(N) == pytest.approx(0.0)
        assert rho.dim == 2


class TestTwoTime:
    def test_zero_delay(self):
        l, rho = bare(SystemParams(omega_drive=0.6, delta=1.0))
        x, y, z = SP, N, SIGMA_MINUS
        assert two_time(l, rho, x, y, z, 0.0) == pytest.approx(np.trace(x @ y @ z @ rho.matrix))

    def test_steady_population(self):
        l, rho = bare(SystemParams(omega_drive=0.6, delta=1.0))
        eye = np.eye(2)
        vals = two_time(l, rho, eye, N, eye, np.linspace(0, 20, 11))
        np.testing.assert_allclose(vals, rho.expect(N), rtol=1e-10)

    @pytest.mark.parametrize("gp", [0.0, 0.4])
    def test_coherence_decay_from_excited_state(self, gp):
        p = SystemParams(omega_drive=0.0, delta=3.0, gamma_phi=gp)
        l = build_system_liouvillian(p)
        excited = DensityMatrix(np.diag([0.0, 1.0]).astype(complex), l.labels)
        tau = np.linspace(0, 5, 21)
        vals = two_time(l, excited, SP, SIGMA_MINUS, np.eye(2), tau)
        np.testing.assert_allclose(np.abs(vals), np.exp(-(0.5 + gp) * tau), atol=1e-12)

    def test_negative_delay(self):
        l, rho = bare(SystemParams())
        with pytest.raises(NegativeDelay):
            two_time(l, rho, SP, N, SIGMA_MINUS, np.array([-1.0]))


class TestUnfilteredG2:
    tau = np.linspace(0, 10, 201)

    @pytest.mark.parametrize("delta", [0.0, 5.0, 20.0])
    def test_full_emission_antibunched(self, delta):
        tr = g2_homodyned(SystemParams(omega_drive=0.1, delta=delta), 0.0, [0.0])
        assert abs(tr.values[0]) < 1e-10

    def test_heitler_shape(self):
        tr = g2_homodyned(SystemParams(omega_drive=0.01, delta=0.0), 0.0, self.tau)
        np.testing.assert_allclose(tr.values, (1 - np.exp(-self.tau / 2)) ** 2, atol=1e-3)

    def test_strong_resonant_drive(self):
        # textbook resonance fluorescence with Rabi frequency 2 Omega
        om = 1.0
        mu = np.sqrt(4 * om**2 - 1 / 16)
        ref = 1 - np.exp(-0.75 * self.tau) * (np.cos(mu * self.tau) + 0.75 / mu * np.sin(mu * self.tau))
        tr = g2_homodyned(SystemParams(omega_drive=om, delta=0.0), 0.0, self.tau)
        np.testing.assert_allclose(tr.values, ref, atol=1e-10)

    def test_even_in_delay(self):
        tau = np.linspace(-3, 3, 61)
        tr = g2_homodyned(SystemParams(omega_drive=0.3, delta=2.0), 0.5, tau)
        np.testing.assert_allclose(tr.values, tr.values[::-1], rtol=1e-12)

    def test_full_homodyne_closed_form(self):
        p = SystemParams()
        tr = g2_homodyned(p, 1.0, [0.0])
        assert tr.values[0] == pytest.approx(1601 * 1601.32 / 0.0064, rel=1e-9)
        assert tr.values[0] == pytest.approx(oracle.homodyned_g20(p), rel=1e-9)

    def test_dark_field(self):
        with pytest.raises(ZeroIntensity):
            g2_homodyned(SystemParams(omega_drive=0.0), 1.0, [0.0])

    def test_antibunching_lost_gradually(self):
        p = SystemParams()
        g0 = [g2_homodyned(p, f, [0.0]).values[0] for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert np.all(np.diff(g0) > 0)


class TestFilteredG2:
    def test_delay_sign_convention(self, default_traces):
        # sensor 1 sits on the -delta peak, so its photon comes first at tau > 0
        tr = default_traces[0.0]
        assert tr.tau[np.argmax(tr.values)] > 0
        assert tr.meta["discrepancy"] < correlations.EPSILON_RTOL

    def test_non_negative(self, default_traces):
        for tr in default_traces.values():
            assert tr.values.min() > -1e-9

    def test_swap_symmetry(self, defaults, side_sensors):
        tau = np.linspace(-4, 4, 81)
        s1, s2 = side_sensors
        a = filtered_g2(defaults, s1, s2, 0.0, tau).values
        b = filtered_g2(defaults, s2, s1, 0.0, -tau).values
        np.testing.assert_allclose(a, b, rtol=1e-6)

    def test_autocorrelation_even(self, defaults):
        tau = np.linspace(-3, 3, 61)
        s = SensorParams(20.0, 5.0)
        tr = filtered_g2(defaults, s, s, 0.0, tau)
        np.testing.assert_allclose(tr.values, tr.values[::-1], rtol=1e-8)

    @pytest.mark.parametrize("f", [0.0, 1.0])
    def test_long_delay_decorrelation(self, defaults, side_sensors, f):
        gamma2 = oracle.cascade_rate(defaults)
        tau = np.array([-40.0, -30.0, 30.0, 40.0]) / gamma2
        tr = filtered_g2(defaults, *side_sensors, f, tau)
        np.testing.assert_allclose(tr.values, 1.0, rtol=0.02)

    def test_epsilon_bias_second_order(self, defaults, side_sensors):
        tau = np.linspace(-5, 5, 21)
        g = [filtered_g2_at_epsilon(defaults, *side_sensors, 0.0, tau, e).values for e in (4e-3, 2e-3, 1e-3)]
        ratio = (g[0] - g[1]) / (g[1] - g[2])
        np.testing.assert_allclose(ratio, 4.0, rtol=0.05)

    def test_richardson(self):
        exact = np.array([1.0, 2.0])
        coarse, fine = exact + 0.4, exact + 0.1
        values, disc = richardson(coarse, fine)
        np.testing.assert_allclose(values, exact)
        assert disc == pytest.approx(0.1)

    def test_not_converged(self, defaults, side_sensors, monkeypatch):
        monkeypatch.setattr(correlations, "EPSILON_RTOL", 0.0)
        with pytest.raises(EpsilonNotConverged):
            filtered_g2(defaults, *side_sensors, 0.0, [0.5])

    def test_mismatched_couplings(self, defaults):
        with pytest.raises(InvalidParams):
            filtered_g2(defaults, SensorParams(-20, 10, 1e-3), SensorParams(20, 10, 2e-3), 0.0, [0.0])

    def test_broad_filter_recovers_unfiltered(self, defaults):
        tau = np.linspace(-3, 3, 121)
        s = SensorParams(0.0, 1000.0)
        filt = filtered_g2(defaults, s, s, 0.0, tau).values
        raw = g2_homodyned(defaults, 0.0, tau).values
        assert np.max(np.abs(filt - raw) / np.maximum(np.abs(raw), 1.0)) < 0.02

    def test_narrow_filters_grow_and_flatten(self, defaults):
        tau = np.linspace(-2, 2, 41)
        peaks, spread = [], []
        for gf in (10.0, 1.0, 0.1):
            v = filtered_g2(defaults, SensorParams(-20, gf), SensorParams(20, gf), 0.0, tau).values
            peaks.append(v.max())
            spread.append(np.ptp(v) / v.mean())
        assert np.all(np.diff(peaks) > 0)
        assert np.all(np.diff(spread) < 0)

    def test_default_grid(self, defaults, side_sensors):
        grid = correlations.default_tau_grid(defaults, *side_sensors)
        assert grid.size == 1001 and grid[0] == -10.0 and grid[-1] == 10.0


class TestSpectrum:
    def test_sum_rule(self):
        for p in (SystemParams(), SystemParams(omega_drive=5.0, delta=1.0, gamma_phi=0.2)):
            s = spectrum(p, [0.0])
            assert abs(s.coherent_weight + s.total_incoherent - s.population) < 1e-10

    def test_population_oracle(self):
        s = spectrum(SystemParams(), [0.0])
        assert s.population == pytest.approx(0.04 / 1601.08, rel=1e-10)

    def test_density_integrates_to_incoherent_weight(self):
        p = SystemParams()
        reach = 50 * max(p.gamma_sigma, p.delta, p.omega_drive)
        s = spectrum(p, np.linspace(-reach, reach, 200001))
        assert s.incoherent_density.min() > -1e-12
        assert s.integrated_incoherent() == pytest.approx(s.total_incoherent, rel=0.01)

    def test_resolvent_matches_time_integral(self):
        # independent route: numpy eigenvectors and trapezoid over tau
        p = SystemParams(omega_drive=0.7, delta=2.0, gamma_phi=0.1)
        l, rho = bare(p)
        w, v = np.linalg.eig(l.matrix)
        alpha = rho.expect(SIGMA_MINUS)
        c = np.linalg.solve(v, (rho.matrix @ SP).reshape(-1, order="F"))
        row = SIGMA_MINUS.T.reshape(-1, order="F") @ v
        tau = np.linspace(0, 80, 400001)
        corr = (np.exp(np.outer(tau, w)) * row) @ c - abs(alpha) ** 2
        for om in (-2.0, 0.0, 1.3, 2.0):
            ref = np.trapezoid((np.exp(1j * om * tau) * corr).real, tau) / np.pi
            assert incoherent_density(p, om) == pytest.approx(ref, rel=1e-6)

    def test_incoherent_to_coherent_ratio(self):
        p = SystemParams(omega_drive=0.1)
        s = spectrum(p, [0.0])
        assert s.total_incoherent / s.coherent_weight == pytest.approx(0.08 / 1601, rel=1e-6)

    def test_heitler_doublet(self):
        p = SystemParams(omega_drive=0.05)
        pos, heights = spectral_peaks(p, np.linspace(-30, 30, 6001))
        # the two dominant features; a weak fourth-order feature sits at the laser line
        main = np.sort(pos[np.argsort(heights)[-2:]])
        np.testing.assert_allclose(main, [-20, 20], atol=0.05)
        assert heights.max() / np.sort(heights)[-3] > 100
        assert asymmetry_ratio(p) == pytest.approx(1.0, rel=0.05)

    def test_detuning_mirror(self):
        p = SystemParams(omega_drive=0.8, delta=3.0, gamma_phi=0.05)
        w = np.linspace(-10, 10, 401)
        a = incoherent_density(p, w)
        b = incoherent_density(p.replace(delta=-3.0), -w)
        assert np.abs(a - b).max() < 1e-10 * np.abs(a).max()

    def test_mollow_triplet(self):
        p = SystemParams(omega_drive=20.0, delta=0.0)
        pos, heights = spectral_peaks(p, np.linspace(-60, 60, 12001))
        order = np.argsort(pos)
        pos, heights = pos[order], heights[order]
        np.testing.assert_allclose(pos, [-40, 0, 40], rtol=0.02, atol=1e-6)
        np.testing.assert_allclose(heights / heights[0], [1, 3, 1], rtol=0.05)

    def test_equal_height_drive(self):
        p = SystemParams(delta=40.0, omega_drive=oracle.equal_height_drive(40.0))
        pos, heights = spectral_peaks(p, np.linspace(-100, 100, 20001))
        assert len(pos) == 3
        heights = heights[np.argsort(pos)]
        assert heights[1] == pytest.approx(heights[0], rel=0.1)
        assert heights[1] == pytest.approx(heights[2], rel=0.1)


DEPHASING = (0.0, 0.001, 0.01, 0.03, 0.1)


@pytest.fixture(scope="module")
def rows():
    spectra = dephasing_lineshape_scan(SystemParams(omega_drive=0.05), DEPHASING, np.linspace(-40, 40, 81))
    assert [s.params.gamma_phi for s in spectra] == list(DEPHASING)
    return dephasing_summary(spectra)


class TestDephasing:
    def test_symmetric_without_dephasing(self, rows):
        assert rows[0].asymmetry_ratio == pytest.approx(1.0, abs=0.02)

    def test_collapse(self, rows):
        assert rows[-1].asymmetry_ratio > 5
        assert rows[-1].total_incoherent > 10 * rows[0].total_incoherent

    def test_total_incoherent_monotone(self, rows):
        assert np.all(np.diff([r.total_incoherent for r in rows]) > 0)

    def test_asymmetry_rises_at_small_dephasing(self, rows):
        # beyond ~0.03 the emitter line's tail leaks into the mirrored window and the ratio turns over
        assert np.all(np.diff([r.asymmetry_ratio for r in rows[:4]]) > 0)

    def test_sharper_at_weaker_drive(self):
        ratios = [asymmetry_ratio(SystemParams(omega_drive=om, gamma_phi=0.01)) for om in (0.2, 0.05, 0.02)]
        assert np.all(np.diff(ratios) > 0)

    def test_regression_baseline(self, rows):
        # frozen from this implementation at omega = 0.05, delta = 20
        assert rows[-1].asymmetry_ratio == pytest.approx(626.63, rel=1e-3)
        assert rows[-1].total_incoherent / rows[0].total_incoherent == pytest.approx(16007, rel=1e-3)

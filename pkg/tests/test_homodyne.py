import numpy as np
import pytest
from scipy.stats import ks_2samp

from quadratomo import fock, gaussian
from quadratomo.calibration import case_by_label
from quadratomo.homodyne import (
    PhaseSchedule,
    QuadratureDataset,
    histogram,
    sample,
    variance_vs_phase,
    voltage_view,
)

SQ_MODEL = gaussian.squeezed_thermal(0.0556, 10.085)


class TestSchedule:
    def test_swept_cycles(self):
        sched = PhaseSchedule("swept", n_phases=4)
        got = sched.assign(10)
        grid = sched.phases()
        assert np.allclose(got, grid[[0, 1, 2, 3, 0, 1, 2, 3, 0, 1]])

    def test_fixed_grid_blocks(self):
        sched = PhaseSchedule("fixed_grid", n_phases=3, samples_per_phase=2)
        got = sched.assign(6)
        grid = sched.phases()
        assert np.allclose(got, grid[[0, 0, 1, 1, 2, 2]])

    def test_too_few_phases(self):
        with pytest.raises(ValueError):
            PhaseSchedule("swept", n_phases=1)


class TestSampling:
    def test_seed_determinism(self):
        sched = PhaseSchedule("swept", 10)
        a = sample(SQ_MODEL, 0.36, sched, 5000, seed=42)
        b = sample(SQ_MODEL, 0.36, sched, 5000, seed=42)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.thetas, b.thetas)
        c = sample(SQ_MODEL, 0.36, sched, 5000, seed=43)
        assert not np.array_equal(a.values, c.values)

    def test_vacuum_unit_efficiency_variance(self):
        sched = PhaseSchedule("swept", 20)
        data = sample(gaussian.vacuum(), 1.0, sched, 100_000, seed=7)
        curve = variance_vs_phase(data, 20)
        n_per = 5000
        se = 0.5 * np.sqrt(2 / (n_per - 1))
        assert np.all(np.abs(curve.variances - 0.5) < 4 * se)

    def test_best_guess_minimum_is_68_percent(self):
        case = case_by_label("best_guess")
        sched = PhaseSchedule("swept", 100)
        data = sample(SQ_MODEL, case, sched, 20_000, seed=11)
        curve = variance_vs_phase(data, 100)
        assert np.nanmin(curve.variances) == pytest.approx(0.34, abs=0.05)

    def test_detected_variance_law(self, rng):
        state = gaussian.squeezed_thermal(0.2, 1.6, 0.8)
        eta = 0.47
        sched = PhaseSchedule("swept", 10)
        data = sample(state, eta, sched, 100_000, seed=3)
        curve = variance_vs_phase(data, 10)
        for theta, var, count in zip(curve.thetas, curve.variances, curve.counts):
            expected = eta * gaussian.variance_at(state, theta) + (1 - eta) / 2
            se = expected * np.sqrt(2 / (count - 1))
            assert abs(var - expected) < 5 * se

    def test_pi_periodicity(self):
        sched = PhaseSchedule("swept", 10)
        data = sample(SQ_MODEL, 0.36, sched, 100_000, seed=5)
        curve = variance_vs_phase(data, 10)
        for k in range(5):
            v1, v2 = curve.variances[k], curve.variances[k + 5]
            n = curve.counts[k]
            se = (v1 + v2) * np.sqrt(2 / (n - 1))
            assert abs(v1 - v2) < 5 * se

    def test_fock_and_gaussian_paths_match(self):
        # a state that the 30-photon space represents essentially exactly, so
        # any path difference would expose an inverse-CDF sampling defect
        state = gaussian.squeezed_thermal(0.25, 2.0)
        rendered = fock.gaussian_to_fock(state)
        sched = PhaseSchedule("swept", 4)
        for seed in range(20):
            ds_g = sample(state, 0.36, sched, 10_000, seed=seed)
            ds_f = sample(rendered, 0.36, sched, 10_000, seed=seed + 1000)
            for t in sched.phases():
                sel_g = ds_g.values[ds_g.thetas == t]
                sel_f = ds_f.values[ds_f.thetas == t]
                assert ks_2samp(sel_g, sel_f).pvalue > 0.001

    def test_fock_path_variances_match_gaussian_path(self):
        state = gaussian.squeezed_thermal(0.25, 2.0, 0.4)
        rendered = fock.gaussian_to_fock(state)
        sched = PhaseSchedule("swept", 8)
        ds_g = sample(state, 0.36, sched, 40_000, seed=21)
        ds_f = sample(rendered, 0.36, sched, 40_000, seed=22)
        cg = variance_vs_phase(ds_g, 8)
        cf = variance_vs_phase(ds_f, 8)
        for vg, vf, n in zip(cg.variances, cf.variances, cg.counts):
            se = (vg + vf) * np.sqrt(2 / (n - 1))
            assert abs(vg - vf) < 4 * se

    def test_unphysical_inputs_rejected(self):
        sched = PhaseSchedule("swept", 4)
        with pytest.raises(ValueError):
            sample(gaussian.vacuum(), 0.0, sched, 100, seed=1)
        with pytest.raises(ValueError):
            sample(gaussian.vacuum(), 1.2, sched, 100, seed=1)


class TestVarianceVsPhase:
    def test_single_bin_is_sample_variance(self):
        values = np.array([0.3, -0.1, 0.7, 1.1, -0.4] * 30)
        data = QuadratureDataset(np.zeros(values.size), values)
        curve = variance_vs_phase(data, 1)
        assert curve.variances[0] == pytest.approx(np.var(values, ddof=1), abs=1e-14)

    def test_sq_model_extrema_match_closed_form(self):
        case = case_by_label("best_guess")
        data = sample(SQ_MODEL, case, PhaseSchedule("swept", 50), 200_000, seed=9)
        curve = variance_vs_phase(data, 50)
        detected = gaussian.apply_loss(SQ_MODEL, case.eta)
        lo_expect = gaussian.variance_at(detected, 0.0)
        hi_expect = gaussian.variance_at(detected, np.pi / 2)
        assert np.nanmin(curve.variances) == pytest.approx(lo_expect, rel=0.06)
        assert np.nanmax(curve.variances) == pytest.approx(hi_expect, rel=0.06)

    def test_thin_bins_flagged(self):
        data = QuadratureDataset(np.zeros(10), np.arange(10.0))
        with pytest.warns(UserWarning, match="fewer than 100"):
            variance_vs_phase(data, 2)


class TestHistogram:
    def test_moment_width_matches_sample_std(self):
        data = sample(gaussian.vacuum(), 1.0, PhaseSchedule("swept", 2), 40_000, seed=13)
        sel = data.values[data.thetas == 0.0]
        hist = histogram(data, (-0.1, 0.1), bin_width=0.05)
        centers = 0.5 * (hist.edges[:-1] + hist.edges[1:])
        mean = np.average(centers, weights=hist.counts)
        std = np.sqrt(np.average((centers - mean) ** 2, weights=hist.counts))
        assert std == pytest.approx(np.std(sel), rel=0.02)
        assert hist.n_selected == sel.size
        assert hist.counts.sum() == sel.size

    def test_empty_window(self):
        data = QuadratureDataset(np.zeros(5), np.arange(5.0))
        hist = histogram(data, (1.0, 2.0), bin_width=0.1)
        assert hist.n_selected == 0
        assert hist.counts.size == 0

    def test_single_bin_spans_everything(self):
        data = QuadratureDataset(np.zeros(5), np.array([0.1, 0.2, 0.3, 0.35, 0.4]))
        hist = histogram(data, (-0.1, 0.1), bin_width=10.0)
        assert hist.counts.tolist() == [5]


class TestVoltageView:
    def test_round_trip_identity(self):
        data = sample(SQ_MODEL, 0.36, PhaseSchedule("swept", 4), 1000, seed=2)
        conv = 1.71e4
        back = voltage_view(voltage_view(data, conv), 1.0 / conv)
        assert np.abs(back.values - data.values).max() < 1e-12

    def test_identity_conversion(self):
        data = sample(SQ_MODEL, 0.36, PhaseSchedule("swept", 4), 100, seed=2)
        assert np.array_equal(voltage_view(data, 1.0).values, data.values)

    def test_best_guess_voltage_variance(self):
        # squeezer OFF: thermal input with n_bar = 0.15 through eta = 0.36
        # gives 0.554 quanta, i.e. 3.2e-5 mV^2 at the reference conversion
        case = case_by_label("best_guess")
        data = sample(gaussian.thermal(0.15), case, PhaseSchedule("swept", 10),
                      200_000, seed=4)
        in_mv = voltage_view(data, case.conversion)
        var_mv2 = np.var(in_mv.values, ddof=1)
        assert var_mv2 == pytest.approx(3.2e-5, rel=0.02)
        assert np.var(data.values, ddof=1) == pytest.approx(0.554, rel=0.02)

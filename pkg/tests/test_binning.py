import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkmass.binning import (
    bin_catalog,
    choose_energy_bins,
    choose_rp_bins,
    empirical_energies,
    empirical_potential,
)
from darkmass.catalog import ObservationSet
from darkmass.model import PotentialProfile, RadialGrid, potential
from darkmass.synthetic import AnalyticModel, sample_catalog


def catalog_from_rp(rp, v3=None):
    rp = np.asarray(rp, dtype=float)
    v3 = np.zeros_like(rp) if v3 is None else np.asarray(v3, dtype=float)
    return ObservationSet(rp, np.zeros_like(rp), v3)


def occupancy(values, edges, side):
    n = edges.size - 1
    idx = np.clip(np.searchsorted(edges, values, side=side) - 1, 0, n - 1)
    return np.bincount(idx, minlength=n)


positive_radii = st.lists(st.floats(0.01, 100.0), min_size=1, max_size=40)
negative_energies = st.lists(st.floats(-50.0, -1e-3), min_size=1, max_size=40)


class TestRadialBins:
    def test_worked_example(self):
        g = choose_rp_bins([0.5, 1.1, 1.2, 3.0])
        np.testing.assert_allclose(g.edges, [0.0, 1.0, 2.0, 3.0])

    def test_single_and_equal(self):
        assert choose_rp_bins([2.0]).n_bins == 1
        assert choose_rp_bins([1.5, 1.5, 1.5]).n_bins == 1

    def test_edge_belongs_to_lower_bin(self):
        # 1.0 sits on the edge of (0, 1] and (1, 2]; counted low, both bins are occupied
        g = choose_rp_bins([1.0, 2.0])
        np.testing.assert_allclose(g.edges, [0.0, 1.0, 2.0])

    def test_rejects_empty_or_zero(self):
        with pytest.raises(ValueError):
            choose_rp_bins([])
        with pytest.raises(ValueError):
            choose_rp_bins([0.0, 0.0])

    @settings(max_examples=80, deadline=None)
    @given(positive_radii)
    def test_occupied_and_maximal(self, rp):
        rp = np.asarray(rp)
        g = choose_rp_bins(rp)
        assert np.all(occupancy(rp, g.edges, "left") >= 1)
        for n in range(g.n_bins + 1, rp.size + 1):
            assert np.any(occupancy(rp, np.linspace(0, rp.max(), n + 1), "left") == 0)

    @settings(max_examples=40, deadline=None)
    @given(positive_radii, st.sampled_from([0.5, 2.0, 8.0]))
    def test_scale_equivariance(self, rp, s):
        # powers of two keep the scaled edges bit-exact
        rp = np.asarray(rp)
        a, b = choose_rp_bins(rp), choose_rp_bins(s * rp)
        assert a.n_bins == b.n_bins
        np.testing.assert_allclose(b.edges, s * a.edges, rtol=1e-12)


class TestEnergyBins:
    def test_worked_example(self):
        g = choose_energy_bins([-4.0, -2.5, -2.4, -0.5])
        assert g.n_bins == 3
        np.testing.assert_allclose(g.edges, [-4.0, -8 / 3, -4 / 3, 0.0])

    def test_single_energy(self):
        g = choose_energy_bins([-1.0])
        assert g.n_bins == 1
        assert g.edges[-1] == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            choose_energy_bins([])
        with pytest.raises(ValueError):
            choose_energy_bins([0.0])
        with pytest.raises(ValueError):
            choose_energy_bins([-1.0, 0.5])

    @settings(max_examples=80, deadline=None)
    @given(negative_energies)
    def test_occupied_maximal_upper_edge_zero(self, e):
        e = np.asarray(e)
        g = choose_energy_bins(e)
        assert g.edges[-1] == 0.0
        assert np.all(occupancy(e, g.edges, "right") >= 1)
        for n in range(g.n_bins + 1, e.size + 1):
            assert np.any(occupancy(e, np.linspace(e.min(), 0.0, n + 1), "right") == 0)


class TestEmpiricalPotential:
    def test_zero_velocities_scale_one(self):
        data = catalog_from_rp([0.3, 0.8, 1.9])
        g = choose_rp_bins(data.rp)
        t = empirical_potential(data, g)
        assert t.scale == 1.0

    def test_scale_doubles_potential(self):
        data = catalog_from_rp([0.3, 0.8, 1.2, 1.9], [0.5, 0.2, 0.4, 0.1])
        g = choose_rp_bins(data.rp)
        t = empirical_potential(data, g)
        unit = PotentialProfile(t.rho / t.scale, g)
        double = PotentialProfile(2 * t.rho, g)
        r = np.linspace(0, 3, 13)
        np.testing.assert_allclose(potential(double, r), 2 * potential(t.profile, r), rtol=1e-13)
        np.testing.assert_allclose(potential(t.profile, r), t.scale * potential(unit, r), rtol=1e-13)

    def test_counts_over_volume_monotonised(self):
        # counts (1, 3, 1) over shell volumes, then running minimum
        data = catalog_from_rp([0.5, 1.2, 1.5, 1.8, 2.5])
        g = RadialGrid([0.0, 1.0, 2.0, 3.0])
        t = empirical_potential(data, g)
        base = np.minimum.accumulate(np.array([1.0, 3.0, 1.0]) / g.shell_volumes)
        np.testing.assert_allclose(t.rho, base, rtol=1e-14)
        assert np.all(np.diff(t.rho) <= 0)

    def test_raw_counts(self):
        data = catalog_from_rp([0.5, 1.2, 1.5, 2.5])
        g = RadialGrid([0.0, 1.0, 2.0, 3.0])
        np.testing.assert_allclose(empirical_potential(data, g, raw_counts=True).rho, [1.0, 1.0, 1.0])

    def test_safety_factor(self):
        data = catalog_from_rp([0.3, 0.8, 1.2, 1.9], [0.5, 0.2, 0.4, 0.1])
        g = choose_rp_bins(data.rp)
        tight = empirical_potential(data, g, safety=1.0)
        e = empirical_energies(data, tight)
        assert np.max(e) == pytest.approx(0.0, abs=1e-12)
        assert empirical_potential(data, g, safety=2.0).scale == pytest.approx(2 * tight.scale)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_all_energies_bound(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        data = ObservationSet(rng.normal(0, 2, n), rng.normal(0, 2, n), rng.normal(0, 3, n))
        b = bin_catalog(data) if np.any(data.v3 != 0) else None
        if b is None:
            return
        assert np.all(b.energies <= 0)
        assert np.all(occupancy(b.energies, b.egrid.edges, "right") >= 1)
        assert np.all(occupancy(data.rp, b.rgrid.edges, "left") >= 1)

    def test_slowest_innermost_is_most_bound(self):
        data = catalog_from_rp([0.1, 0.8, 1.2, 1.9], [0.0, 0.2, 0.4, 0.1])
        e = empirical_energies(data, empirical_potential(data, choose_rp_bins(data.rp)))
        assert np.argmin(e) == 0


class TestPlummerEnergyShape:
    def test_histogram_peaks_inside(self):
        data, _ = sample_catalog(np.random.default_rng(2), AnalyticModel.plummer(), 255, r_max=5.0)
        b = bin_catalog(data)
        counts = occupancy(b.energies, b.egrid.edges, "right")
        peak = int(np.argmax(counts))
        assert 0 < peak < b.egrid.n_bins - 1

import numpy as np
import pytest
from scipy import integrate, stats

from darkmass.model import EnergyGrid, PotentialProfile, RadialGrid, potential
from darkmass.synthetic import (
    AnalyticModel,
    binned_density,
    binned_df,
    energy_cut,
    model_density,
    model_mass,
    model_potential,
    plummer_df,
    sample_catalog,
    sample_phase_space,
    sample_speed,
    truth_tables,
)

PLUMMER = AnalyticModel.plummer(mass=2.0, a=0.5, G=1.5)


class TestClosedForms:
    def test_plummer_centre_and_scale(self):
        assert model_potential(PLUMMER, 0.0) == pytest.approx(1.5 * 2.0 / 0.5)
        assert model_density(PLUMMER, 0.5) / model_density(PLUMMER, 0.0) == pytest.approx(2**-2.5, rel=1e-14)
        assert 2**-2.5 == pytest.approx(0.17678, abs=1e-5)

    def test_plummer_mass_is_integral_of_density(self):
        for r in (0.1, 0.5, 3.0):
            ref = integrate.quad(lambda s: 4 * np.pi * s * s * model_density(PLUMMER, s), 0, r, epsrel=1e-12)[0]
            assert model_mass(PLUMMER, r) == pytest.approx(ref, rel=1e-10)

    def test_uniform_matches_binned_model_potential(self):
        m = AnalyticModel.uniform(mass=3.0, R=2.0)
        grid = RadialGrid(np.linspace(0, 2.0, 10_001))
        prof = PotentialProfile(binned_density(m, grid), grid)
        r = np.linspace(0, 4, 17)
        np.testing.assert_allclose(potential(prof, r), model_potential(m, r), rtol=1e-5)

    def test_plummer_df_normalised(self):
        # int f d^3x d^3v = 1 over all bound states
        m = PLUMMER
        g = lambda r: 16 * np.pi**2 * r * r * integrate.quad(
            lambda E: plummer_df(m, E) * np.sqrt(2 * (E + model_potential(m, r))),
            -model_potential(m, r), 0, epsrel=1e-11)[0]
        total = integrate.quad(g, 0, np.inf, limit=200, epsrel=1e-9)[0]
        assert total == pytest.approx(1.0, rel=1e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            AnalyticModel("king", 1.0, 1.0)
        with pytest.raises(ValueError):
            AnalyticModel.plummer(mass=-1.0)


class TestSampling:
    def test_radii_follow_mass_profile(self):
        x, _ = sample_phase_space(np.random.default_rng(1), PLUMMER, 100_000)
        r = np.linalg.norm(x, axis=1)
        ks = stats.kstest(r, lambda s: model_mass(PLUMMER, s) / PLUMMER.mass)
        assert ks.pvalue > 0.01

    def test_speed_distribution_at_centre(self):
        # mean v^2/2 at r = 0 against a 1-D quadrature of p(v) ~ f(v^2/2 - phi) v^2
        m = PLUMMER
        v = sample_speed(np.random.default_rng(2), m, np.zeros(1_000_000))
        k = 0.5 * v * v
        phi0 = model_potential(m, 0.0)
        vesc = np.sqrt(2 * phi0)
        p = lambda s: plummer_df(m, 0.5 * s * s - phi0) * s * s
        ref = integrate.quad(lambda s: 0.5 * s * s * p(s), 0, vesc)[0] / integrate.quad(p, 0, vesc)[0]
        assert abs(k.mean() - ref) < 3 * k.std() / np.sqrt(k.size)

    def test_all_bound(self):
        x, v = sample_phase_space(np.random.default_rng(3), PLUMMER, 20_000)
        e = 0.5 * np.sum(v * v, axis=1) - model_potential(PLUMMER, np.linalg.norm(x, axis=1))
        assert np.all(e <= 0)

    def test_energy_truncation(self):
        x, v = sample_phase_space(np.random.default_rng(4), PLUMMER, 5_000, r_max=1.0)
        e = 0.5 * np.sum(v * v, axis=1) - model_potential(PLUMMER, np.linalg.norm(x, axis=1))
        assert np.all(e <= energy_cut(PLUMMER, 1.0))
        assert np.all(np.linalg.norm(x, axis=1) <= 1.0)

    def test_projected_isotropy(self):
        data, _ = sample_catalog(np.random.default_rng(5), PLUMMER, 20_000)
        assert stats.ks_2samp(data.x1, data.x2).pvalue > 0.01

    def test_noise(self):
        rng = np.random.default_rng(6)
        clean, truth = sample_catalog(rng, PLUMMER, 500, sigma_v3=0.0)
        np.testing.assert_array_equal(clean.v3, truth["v"][:, 2])
        np.testing.assert_array_equal(clean.sigma_v3, np.zeros(500))
        noisy, truth = sample_catalog(rng, PLUMMER, 500, sigma_v3=0.3)
        resid = noisy.v3 - truth["v"][:, 2]
        assert resid.std() == pytest.approx(0.3, rel=0.15)

    def test_usage(self):
        with pytest.raises(ValueError):
            sample_catalog(np.random.default_rng(0), PLUMMER, 0)
        with pytest.raises(NotImplementedError):
            sample_catalog(np.random.default_rng(0), AnalyticModel.uniform(), 10)

    def test_deterministic(self):
        a, _ = sample_catalog(np.random.default_rng(9), PLUMMER, 50)
        b, _ = sample_catalog(np.random.default_rng(9), PLUMMER, 50)
        np.testing.assert_array_equal(a.v3, b.v3)


class TestTruthTables:
    def test_binned_density_mass_weighted(self):
        grid = RadialGrid([0.0, 0.5, 2.0])
        rho = binned_density(PLUMMER, grid)
        ref = [integrate.quad(lambda s: 4 * np.pi * s * s * model_density(PLUMMER, s), a, b)[0] for a, b in
               [(0, 0.5), (0.5, 2.0)]] / grid.shell_volumes
        np.testing.assert_allclose(rho, ref, rtol=1e-10)

    def test_binned_df_flat_bins_recover_df(self):
        # narrow bins: bin value -> f(E) at the bin centre, up to the overall normalisation
        m = AnalyticModel.plummer()
        grid = RadialGrid(np.linspace(0, 50.0, 3))
        e = np.linspace(-0.9, -0.3, 7)
        egrid = EnergyGrid(np.append(e, 0.0))
        fb = binned_df(m, grid, egrid)[:-1]
        centre = plummer_df(m, 0.5 * (e[1:] + e[:-1]))
        ratio = fb / centre
        np.testing.assert_allclose(ratio, ratio[0], rtol=0.03)

    def test_normalised_against_volumes(self):
        m = AnalyticModel.plummer()
        grid = RadialGrid([0.0, 1.0, 3.0])
        egrid = EnergyGrid([-1.0, -0.5, -0.2, 0.0])
        t = truth_tables(m, grid, egrid, r_max=3.0)
        assert set(t) == {"rho", "f", "r_edges", "e_edges"}
        assert t["f"][-1] == 0.0  # above the truncation energy
        assert np.all(t["f"][:-1] > 0)

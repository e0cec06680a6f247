import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from darkmass.model import (
    EnergyGrid,
    PhasePoint,
    PotentialProfile,
    RadialGrid,
    check_density,
    df_integral,
    enclosed_mass,
    energy,
    extend_grid,
    potential,
    radius_of_potential,
)


@st.composite
def density_models(draw, max_bins=6):
    n = draw(st.integers(1, max_bins))
    widths = draw(st.lists(st.floats(0.05, 3.0), min_size=n, max_size=n))
    steps = draw(st.lists(st.floats(0.0, 2.0), min_size=n, max_size=n))
    rho = np.cumsum(steps[::-1])[::-1] + draw(st.floats(0.0, 0.5))
    return np.asarray(rho), RadialGrid(np.concatenate([[0.0], np.cumsum(widths)]))


def shell_potential_oracle(rho, edges, r, G=1.0):
    """phi(r) = G M(r)/r + 4 pi G int_r^inf rho(s) s ds, by adaptive quadrature."""
    dens = lambda s: rho[min(np.searchsorted(edges, s, side="right") - 1, rho.size - 1)] if s < edges[-1] else 0.0
    pts = list(edges)
    m = integrate.quad(lambda s: 4 * np.pi * s * s * dens(s), 0, r, points=[p for p in pts if p < r] or None,
                       limit=200)[0] if r > 0 else 0.0
    tail = integrate.quad(lambda s: s * dens(s), r, max(edges[-1], r), points=[p for p in pts if p > r] or None,
                          limit=200)[0]
    return (G * m / r if r > 0 else 0.0) + 4 * np.pi * G * tail


class TestGrids:
    def test_radial_grid_properties(self):
        g = RadialGrid([0.0, 1.0, 3.0])
        assert g.n_bins == 2
        assert g.r_max == 3.0
        np.testing.assert_allclose(g.shell_volumes, 4 * np.pi / 3 * np.array([1.0, 26.0]))
        np.testing.assert_allclose(g.midpoints, [0.5, 2.0])

    @pytest.mark.parametrize("edges", [[0.0], [0.5, 1.0], [0.0, 1.0, 1.0], [0.0, np.inf]])
    def test_radial_grid_rejects(self, edges):
        with pytest.raises(ValueError):
            RadialGrid(edges)

    def test_energy_grid(self):
        g = EnergyGrid([-2.0, -1.0, 0.0])
        assert g.n_bins == 2
        np.testing.assert_allclose(g.widths, [1.0, 1.0])
        with pytest.raises(ValueError):
            EnergyGrid([-1.0, 0.5])

    def test_extend_grid(self):
        g = extend_grid(RadialGrid([0.0, 1.0, 3.0]), 0.5)
        np.testing.assert_allclose(g.edges, [0.0, 1.0, 3.0, 4.0])
        assert extend_grid(g, 0.0) is g


class TestDensity:
    def test_check_density(self):
        np.testing.assert_array_equal(check_density([2.0, 1.0, 1.0]), [2.0, 1.0, 1.0])
        for bad in ([1.0, 2.0], [1.0, -0.1], [np.nan]):
            with pytest.raises(ValueError):
                check_density(bad)
        with pytest.raises(ValueError):
            check_density([1.0], RadialGrid([0.0, 1.0, 2.0]))

    def test_enclosed_mass_uniform(self):
        g = RadialGrid([0.0, 1.0])
        np.testing.assert_allclose(enclosed_mass([1.0], g, [0.5, 1.0, 5.0]),
                                   4 * np.pi / 3 * np.array([0.125, 1.0, 1.0]), rtol=1e-14)

    def test_enclosed_mass_negative_radius(self):
        with pytest.raises(ValueError):
            enclosed_mass([1.0], RadialGrid([0.0, 1.0]), -1.0)


class TestUniformSphere:
    # rho0 = 1, R = 1, G = 1: phi = 2 pi (1 - r^2 / 3) inside, 4 pi / (3 r) outside
    prof = PotentialProfile([1.0], RadialGrid([0.0, 1.0]), 1.0)

    def test_centre_edge_and_outside(self):
        assert potential(self.prof, 0.0) == pytest.approx(2 * np.pi, abs=1e-12)
        assert potential(self.prof, 1.0) == pytest.approx(4 * np.pi / 3, abs=1e-12)
        assert potential(self.prof, 2.0) == pytest.approx(2 * np.pi / 3, abs=1e-12)

    def test_interior_quadratic(self):
        r = np.linspace(0, 1, 11)
        np.testing.assert_allclose(potential(self.prof, r), 2 * np.pi * (1 - r**2 / 3), rtol=1e-14)

    def test_split_bins_agree(self):
        split = PotentialProfile([1.0, 1.0, 1.0], RadialGrid([0.0, 0.3, 0.7, 1.0]), 1.0)
        r = np.linspace(0, 3, 31)
        np.testing.assert_allclose(potential(split, r), potential(self.prof, r), rtol=1e-13)

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            potential(self.prof, -0.1)


class TestPotential:
    @settings(max_examples=40, deadline=None)
    @given(density_models())
    def test_matches_shell_quadrature(self, model):
        rho, grid = model
        prof = PotentialProfile(rho, grid)
        for r in np.linspace(0, 1.3 * grid.r_max, 7):
            assert potential(prof, r) == pytest.approx(shell_potential_oracle(rho, grid.edges, r), rel=1e-9, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(density_models())
    def test_positive_non_increasing_continuous(self, model):
        rho, grid = model
        prof = PotentialProfile(rho, grid)
        r = np.linspace(0, 2 * grid.r_max, 400)
        phi = potential(prof, r)
        assert np.all(phi >= 0)
        assert np.all(np.diff(phi) <= 1e-12 * max(phi[0], 1e-300))
        eps = 1e-9 * grid.r_max
        inner = grid.edges[1:]
        np.testing.assert_allclose(potential(prof, inner - eps), potential(prof, inner + eps),
                                   rtol=1e-7, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(density_models(), st.floats(0.1, 10.0))
    def test_linear_in_density(self, model, c):
        rho, grid = model
        r = np.linspace(0, 1.5 * grid.r_max, 50)
        np.testing.assert_allclose(potential(PotentialProfile(c * rho, grid), r),
                                   c * potential(PotentialProfile(rho, grid), r), rtol=1e-12, atol=1e-300)

    def test_poisson_equation_inside_bins(self):
        # (1/r^2) d/dr (r^2 dphi/dr) = -4 pi G rho away from the edges
        rho = np.array([3.0, 1.5, 0.2])
        grid = RadialGrid([0.0, 0.5, 1.2, 2.0])
        prof = PotentialProfile(rho, grid, G=2.0)
        h = 1e-4
        for r, rho_i in [(0.25, 3.0), (0.9, 1.5), (1.6, 0.2)]:
            flux = lambda s: s * s * (potential(prof, s + h) - potential(prof, s - h)) / (2 * h)
            lap = (flux(r + h) - flux(r - h)) / (2 * h) / r**2
            assert lap == pytest.approx(-4 * np.pi * 2.0 * rho_i, rel=1e-4)

    def test_keplerian_outside(self):
        prof = PotentialProfile([2.0, 1.0], RadialGrid([0.0, 1.0, 2.0]), 3.0)
        r = np.array([2.0, 5.0, 50.0])
        np.testing.assert_allclose(potential(prof, r), 3.0 * prof.m_total / r, rtol=1e-14)
        np.testing.assert_allclose(prof.mass(r), prof.m_total)

    def test_zero_density(self):
        prof = PotentialProfile([0.0, 0.0], RadialGrid([0.0, 1.0, 2.0]))
        assert potential(prof, 0.0) == 0.0
        assert prof.phi0 == 0.0


class TestRadiusOfPotential:
    @settings(max_examples=40, deadline=None)
    @given(density_models(), st.floats(0.0, 1.0))
    def test_inverts_potential(self, model, u):
        rho, grid = model
        prof = PotentialProfile(rho, grid)
        if not prof.phi0 > prof.phi_edges[-1]:
            return
        target = prof.phi_edges[-1] + u * (prof.phi0 - prof.phi_edges[-1])
        r = radius_of_potential(prof, target)
        assert 0.0 <= r <= grid.r_max
        assert potential(prof, r) == pytest.approx(target, rel=1e-10, abs=1e-10 * prof.phi0)

    def test_out_of_range(self):
        prof = PotentialProfile([1.0], RadialGrid([0.0, 1.0]))
        with pytest.raises(ValueError):
            radius_of_potential(prof, 10.0)
        with pytest.raises(ValueError):
            radius_of_potential(prof, 1.0)

    def test_vectorised(self):
        prof = PotentialProfile([1.0], RadialGrid([0.0, 1.0]))
        r = np.array([0.0, 0.3, 1.0])
        np.testing.assert_allclose(radius_of_potential(prof, potential(prof, r)), r, atol=1e-12)


class TestEnergy:
    def test_energy(self):
        prof = PotentialProfile([1.0], RadialGrid([0.0, 1.0]))
        p = PhasePoint([0.0, 0.0, 0.0], [1.0, 0.0, 1.0])
        assert energy(prof, p) == pytest.approx(1.0 - 2 * np.pi)

    def test_phase_point_validation(self):
        with pytest.raises(ValueError):
            PhasePoint([0.0, 0.0], [0.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            PhasePoint([np.nan, 0.0, 0.0], [0.0, 0.0, 0.0])


class TestDfIntegral:
    g = EnergyGrid([-3.0, -1.0, -0.5, 0.0])
    f = np.array([2.0, 1.0, 4.0])

    def test_hand_values(self):
        assert df_integral(self.f, self.g, -3.0) == pytest.approx(4.0 + 0.5 + 2.0)
        assert df_integral(self.f, self.g, -0.75) == pytest.approx(0.25 + 2.0)
        assert df_integral(self.f, self.g, -10.0) == pytest.approx(6.5)
        assert df_integral(self.f, self.g, 0.0) == 0.0
        assert df_integral(self.f, self.g, 1.0) == 0.0

    def test_matches_quadrature(self):
        e = np.linspace(-3.5, 0.2, 37)
        step = lambda x: self.f[np.searchsorted(self.g.edges, x, side="right") - 1] if -3 <= x < 0 else 0.0
        ref = []
        for x in e:
            lo = min(x, 0.0)
            pts = [p for p in (-3.0, -1.0, -0.5) if lo < p < 0.0] or None
            ref.append(integrate.quad(step, lo, 0.0, points=pts, limit=100)[0] if lo < 0 else 0.0)
        np.testing.assert_allclose(df_integral(self.f, self.g, e), ref, atol=1e-10)

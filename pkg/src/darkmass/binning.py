"""Data-driven choice of the radial and energy grids, and empirical energies.

Both grids use equal-width bins and the largest bin count for which no bin is
empty. Empirical energies come from a potential built out of a scaled,
monotonised histogram of projected radii, using only the observed
coordinates (so the kinetic term is an underestimate).
"""

from dataclasses import dataclass

import numpy as np

from .model import G_CODE, EnergyGrid, PotentialProfile, RadialGrid, potential


def _max_occupied_bins(values, lo, hi, side):
    """Largest N such that N equal bins on [lo, hi] are all occupied."""
    values = np.asarray(values, dtype=float)
    for n in range(values.size, 0, -1):
        edges = np.linspace(lo, hi, n + 1)
        idx = np.clip(np.searchsorted(edges, values, side=side) - 1, 0, n - 1)
        if np.unique(idx).size == n:
            return n, edges
    raise ValueError("no values to bin")


def choose_rp_bins(rp):
    """Equal-width radial bins on (0, max rp] with every bin occupied.

    Bins are half-open ``(low, high]``; a datum on an edge belongs to the
    lower bin.
    """
    rp = np.asarray(rp, dtype=float)
    if rp.size == 0:
        raise ValueError("need at least one datum")
    r_max = float(rp.max())
    if not r_max > 0:
        raise ValueError("all projected radii are zero")
    _, edges = _max_occupied_bins(rp, 0.0, r_max, side="left")
    return RadialGrid(edges)


def choose_energy_bins(energies):
    """Equal-width energy bins on [min E, 0] with every bin occupied.

    Bins are ``[low, high)`` with the last one closed at 0.
    """
    e = np.asarray(energies, dtype=float)
    if e.size == 0:
        raise ValueError("need at least one energy")
    e_min = float(e.min())
    if not e_min < 0:
        raise ValueError("energies must include a negative value")
    if np.any(e > 0):
        raise ValueError("empirical energies must be <= 0")
    _, edges = _max_occupied_bins(e, e_min, 0.0, side="right")
    edges[-1] = 0.0
    return EnergyGrid(edges)


def _rp_counts(rp, grid):
    idx = np.clip(np.searchsorted(grid.edges, rp, side="left") - 1, 0, grid.n_bins - 1)
    return np.bincount(idx, minlength=grid.n_bins).astype(float)


@dataclass
class EmpiricalPotential:
    rho: np.ndarray
    profile: PotentialProfile
    scale: float


def empirical_potential(data, grid, G=G_CODE, *, raw_counts=False, safety=1.1):
    """Potential of a scaled, monotonised histogram of projected radii.

    Counts are divided by shell volume (unless ``raw_counts``), replaced by
    their running minimum outward, and scaled by the smallest factor (times
    ``safety``) that leaves every tracer with ``v3^2/2 - phi(rp) <= 0``.
    """
    rp = data.rp
    counts = _rp_counts(rp, grid)
    base = counts if raw_counts else counts / grid.shell_volumes
    base = np.minimum.accumulate(base)
    unit = PotentialProfile(base, grid, G)
    phi_unit = potential(unit, rp)
    need = 0.5 * data.v3**2
    c_min = float(np.max(need / phi_unit))
    scale = safety * c_min if c_min > 0 else 1.0
    rho = scale * base
    return EmpiricalPotential(rho, PotentialProfile(rho, grid, G), scale)


def empirical_energies(data, table):
    """``v3^2/2 - phi_emp(rp)`` per tracer."""
    profile = table.profile if isinstance(table, EmpiricalPotential) else table
    return 0.5 * data.v3**2 - potential(profile, data.rp)


@dataclass
class BinningResult:
    rgrid: RadialGrid
    egrid: EnergyGrid
    energies: np.ndarray
    table: EmpiricalPotential

    @property
    def scale(self):
        return self.table.scale


def bin_catalog(data, G=G_CODE, *, raw_counts=False, safety=1.1):
    rgrid = choose_rp_bins(data.rp)
    table = empirical_potential(data, rgrid, G, raw_counts=raw_counts, safety=safety)
    energies = empirical_energies(data, table)
    egrid = choose_energy_bins(energies)
    return BinningResult(rgrid, egrid, energies, table)

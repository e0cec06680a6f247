"""Spherical forward model: grids, enclosed mass, potential and energy.

Sign convention throughout the package: the potential solves
``laplacian(phi) = -4 pi G rho``, so ``phi >= 0`` and decreases outward, and a
particle is bound when ``E = v**2 / 2 - phi(r) <= 0``.

Density is piecewise constant on a radial grid and zero beyond the outermost
edge; the exterior potential is Keplerian.
"""

from dataclasses import dataclass

import numpy as np

# kpc (km/s)^2 / M_sun
G_ASTRO = 4.300917270e-6
G_CODE = 1.0

_BISECT_MAX_ITER = 200


def _as_edges(edges, name):
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError(f"{name} needs at least two edges")
    if not np.all(np.isfinite(edges)):
        raise ValueError(f"{name} edges must be finite")
    if np.any(np.diff(edges) <= 0):
        raise ValueError(f"{name} edges must be strictly increasing")
    edges.setflags(write=False)
    return edges


@dataclass(frozen=True)
class RadialGrid:
    """Radial bin edges ``0 = r_0 < r_1 < ... < r_Nx``."""

    edges: np.ndarray

    def __post_init__(self):
        edges = _as_edges(self.edges, "RadialGrid")
        if edges[0] != 0.0:
            raise ValueError("RadialGrid must start at r = 0")
        object.__setattr__(self, "edges", edges)

    @property
    def n_bins(self):
        return self.edges.size - 1

    @property
    def r_max(self):
        return float(self.edges[-1])

    @property
    def shell_volumes(self):
        return 4.0 * np.pi * np.diff(self.edges**3) / 3.0

    @property
    def midpoints(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


@dataclass(frozen=True)
class EnergyGrid:
    """Energy bin edges ``E_0 < E_1 < ... < E_NE <= 0`` (bound states only)."""

    edges: np.ndarray

    def __post_init__(self):
        edges = _as_edges(self.edges, "EnergyGrid")
        if edges[-1] > 0.0:
            raise ValueError("EnergyGrid upper edge must be <= 0")
        object.__setattr__(self, "edges", edges)

    @property
    def n_bins(self):
        return self.edges.size - 1

    @property
    def widths(self):
        return np.diff(self.edges)


def extend_grid(grid, extra_bins=1.0):
    """Grid with one more edge ``extra_bins`` outer-bin widths beyond ``r_max``.

    Used as the modelled tracer region: density is zero in the added shell,
    so the potential there is Keplerian, but tracers may occupy it.
    """
    if extra_bins <= 0:
        return grid
    edges = grid.edges
    width = edges[-1] - edges[-2]
    return RadialGrid(np.append(edges, edges[-1] + extra_bins * width))


def check_density(rho, grid=None):
    """Validate a density vector; returns it as a float array."""
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1:
        raise ValueError("density vector must be one-dimensional")
    if grid is not None and rho.size != grid.n_bins:
        raise ValueError(f"density has {rho.size} entries, grid has {grid.n_bins} bins")
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ValueError("density must be finite and non-negative")
    if np.any(np.diff(rho) > 0):
        raise ValueError("density must be non-increasing outward")
    return rho


def is_valid_density(rho):
    rho = np.asarray(rho, dtype=float)
    return bool(np.all(rho >= 0) and np.all(np.diff(rho) <= 0))


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != (3,) or v.shape != (3,):
            raise ValueError("PhasePoint needs 3-vectors")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("PhasePoint components must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)


def enclosed_mass(rho, grid, r):
    """Mass inside radius ``r`` for piecewise-constant ``rho`` on ``grid``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    rho = np.asarray(rho, dtype=float)
    lo = grid.edges[:-1]
    hi = grid.edges[1:]
    rr = r[..., None]
    shells = np.minimum(rr, hi) ** 3 - np.minimum(rr, lo) ** 3
    return 4.0 * np.pi * np.sum(rho * shells, axis=-1) / 3.0


class PotentialProfile:
    """Precomputed piecewise coefficients of phi(r) and M(r) for one density.

    Inside bin ``i`` (``r_{i-1} <= r <= r_i``)::

        M(r)   = M_{i-1} + 4 pi rho_i (r^3 - r_{i-1}^3) / 3
        phi(r) = G M(r) / r + 2 pi G rho_i (r_i^2 - r^2) + outer_i

    where ``outer_i`` is the contribution of all shells beyond ``r_i``.
    """

    def __init__(self, rho, grid, G=G_CODE):
        self.grid = grid
        self.rho = np.array(rho, dtype=float)
        if self.rho.shape != (grid.n_bins,):
            raise ValueError(f"density has shape {self.rho.shape}, grid has {grid.n_bins} bins")
        if np.any(self.rho < 0):
            raise ValueError("density must be non-negative")
        self.G = float(G)
        edges = grid.edges
        shell_mass = 4.0 * np.pi * self.rho * np.diff(edges**3) / 3.0
        self.mass_edges = np.concatenate([[0.0], np.cumsum(shell_mass)])
        shell_phi = 2.0 * np.pi * self.G * self.rho * np.diff(edges**2)
        # outer[i] = sum over bins j > i (0-based) of shell_phi[j]
        self.outer = np.concatenate([np.cumsum(shell_phi[::-1])[::-1][1:], [0.0]])
        self.m_total = float(self.mass_edges[-1])
        self.phi0 = float(np.sum(shell_phi))
        self.phi_edges = self._phi(edges)

    @property
    def r_max(self):
        return self.grid.r_max

    def mass(self, r):
        r = np.asarray(r, dtype=float)
        edges = self.grid.edges
        i = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, self.grid.n_bins - 1)
        rc = np.minimum(r, edges[-1])
        return self.mass_edges[i] + 4.0 * np.pi * self.rho[i] * (rc**3 - edges[i] ** 3) / 3.0

    def _phi(self, r):
        edges = self.grid.edges
        G = self.G
        i = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, self.grid.n_bins - 1)
        rho_i = self.rho[i]
        m = self.mass_edges[i] + 4.0 * np.pi * rho_i * (r**3 - edges[i] ** 3) / 3.0
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = np.where(r > 0, G * m / np.where(r > 0, r, 1.0), 0.0)
        phi_in = inner + 2.0 * np.pi * G * rho_i * (edges[i + 1] ** 2 - r**2) + self.outer[i]
        with np.errstate(divide="ignore"):
            phi_out = G * self.m_total / np.where(r > edges[-1], r, 1.0)
        return np.where(r > edges[-1], phi_out, phi_in)

    def __call__(self, r):
        return potential(self, r)


def potential(profile, r):
    """Gravitational potential phi(r) (positive, non-increasing)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    out = profile._phi(r)
    return float(out) if out.ndim == 0 else out


def radius_of_potential(profile, phi_target, *, check=True):
    """Smallest ``r`` in ``[0, r_max]`` with ``phi(r) == phi_target``.

    Vectorised bisection on the monotone potential, started from the radial
    bin that brackets the target and run until every bracket is narrower than
    ``1e-14 r_max``; that keeps the potential error far below ``1e-10 phi(0)``.
    """
    target = np.asarray(phi_target, dtype=float)
    r_max = profile.r_max
    phi_lo = profile.phi_edges[-1]
    scale = profile.phi0
    if check:
        slack = 1e-12 * max(scale, 1e-300)
        if np.any(target > scale + slack) or np.any(target < phi_lo - slack):
            raise ValueError(
                f"target potential outside [{phi_lo:g}, {scale:g}]"
            )
    t = np.clip(target, phi_lo, scale).ravel()
    # invariant: phi(lo) > t >= phi(hi), unless phi(0) <= t (answer 0)
    done = scale <= t
    edges = profile.grid.edges
    k = np.searchsorted(-profile.phi_edges, -t, side="left")
    k = np.clip(k, 1, edges.size - 1)
    lo = np.where(done, 0.0, edges[k - 1])
    hi = np.where(done, 0.0, edges[k])
    tol_r = 1e-14 * r_max
    for _ in range(_BISECT_MAX_ITER):
        active = (hi - lo) > tol_r
        if not np.any(active):
            break
        mid = 0.5 * (lo + hi)
        above = profile._phi(mid) > t
        lo = np.where(active & above, mid, lo)
        hi = np.where(active & ~above, mid, hi)
    out = hi.reshape(target.shape)
    return float(out) if out.ndim == 0 else out


def energy(profile, p):
    """Specific energy ``|v|^2 / 2 - phi(|x|)``."""
    return 0.5 * float(np.dot(p.v, p.v)) - potential(profile, float(np.linalg.norm(p.x)))


def df_integral(f, egrid, e_low):
    """Integral of piecewise-constant ``f`` from ``e_low`` up to ``min(0, E_NE)``.

    ``f`` vanishes outside ``[E_0, E_NE]``. Vectorised over ``e_low``.
    """
    f = np.asarray(f, dtype=float)
    e = np.asarray(e_low, dtype=float)[..., None]
    lo = egrid.edges[:-1]
    hi = np.minimum(egrid.edges[1:], 0.0)
    overlap = np.clip(hi - np.maximum(e, lo), 0.0, None)
    out = np.sum(f * overlap, axis=-1)
    return float(out) if out.ndim == 0 else out

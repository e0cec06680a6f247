"""Projected phase-space pdf over the observables (x1, x2, v3).

The isotropic pdf f(E) is integrated over the unobserved (x3, v1, v2). The
velocity-plane integral is exact: with ``E = v_perp^2/2 + v3^2/2 - phi`` the
disk integral collapses to ``2 pi * int_{e}^{0} f(E) dE``. What remains is a
line-of-sight integral, done by fixed-order Gauss-Legendre on sub-intervals
split at every kink of the integrand.

Because f is piecewise constant, the unnormalised projected pdf is linear in
f: ``nu_unnorm(y_k) = sum_j A[k, j] f_j``, and the phase-space norm is
``N = sum_j w_j f_j``. :func:`projection_matrix` and :func:`dos_weights`
return A and w, so a change of f alone costs one matrix-vector product.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .model import df_integral, potential


class DegenerateModelError(ValueError):
    """The model assigns zero phase-space mass (N(rho, f) = 0)."""


@dataclass(frozen=True)
class ProjectionConfig:
    order: int = 16
    conv_nodes: int = 11
    convolve_errors: bool = False

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("quadrature order must be >= 2")
        if self.conv_nodes < 1:
            raise ValueError("convolution node count must be >= 1")


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def gauss_hermite(n):
    t, w = np.polynomial.hermite.hermgauss(n)
    return t, w / np.sqrt(np.pi)


def inner_velocity_integral(profile, f, egrid, r, v3):
    """Integral of f over the (v1, v2) plane at radius ``r`` and l.o.s. speed ``v3``."""
    e = 0.5 * np.asarray(v3, dtype=float) ** 2 - potential(profile, r)
    out = np.where(e < 0, 2.0 * np.pi * df_integral(f, egrid, np.minimum(e, 0.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def projection_matrix(profile, egrid, rp, v3, order=16):
    """Matrix A with ``nu_unnorm(rp_k, v3_k) = A[k] @ f``.

    Column j is ``4 pi * int_0^L overlap_j(e(x3)) dx3`` where overlap_j is
    the part of energy bin j above ``e(x3) = v3^2/2 - phi(sqrt(rp^2+x3^2))``.
    With X_j the line-of-sight position where e crosses E_j this is::

        dE_j X_{j-1} + int_{X_{j-1}}^{X_j} (E_j - e) dx3

    The integral of phi along the line of sight is accumulated by
    Gauss-Legendre over sub-intervals split at radial-edge and energy-edge
    crossings, where the integrand is smooth.
    """
    rp = np.atleast_1d(np.asarray(rp, dtype=float))
    v3 = np.atleast_1d(np.asarray(v3, dtype=float))
    rp, v3 = np.broadcast_arrays(rp, v3)
    x, w = gauss_legendre(order)
    return _kernels.projection_matrix(
        profile.grid.edges, profile.rho, profile.mass_edges, profile.outer,
        profile.G, profile.m_total, profile.phi_edges, egrid.edges,
        np.ascontiguousarray(rp.ravel()), np.ascontiguousarray(v3.ravel()),
        x, w, 1e-14 * profile.r_max,
    )


def data_matrix(profile, egrid, data, cfg=ProjectionConfig()):
    """Projection matrix for a catalog, convolved with v3 errors when enabled."""
    rp = data.rp
    if cfg.convolve_errors and data.sigma_v3 is not None:
        t, wt = gauss_hermite(cfg.conv_nodes)
        u = data.v3[:, None] + np.sqrt(2.0) * data.sigma_v3[:, None] * t[None, :]
        A = projection_matrix(profile, egrid, np.repeat(rp, t.size), u.ravel(), cfg.order)
        return np.einsum("knj,n->kj", A.reshape(len(data), t.size, -1), wt)
    return projection_matrix(profile, egrid, rp, data.v3, cfg.order)


def project_pdf_unnorm(profile, f, egrid, grid, rp, v3, cfg=ProjectionConfig()):
    """``2 int_0^L inner_velocity_integral(sqrt(rp^2 + x3^2), v3) dx3``."""
    if grid is not profile.grid and not np.array_equal(grid.edges, profile.grid.edges):
        raise ValueError("grid does not match the potential profile")
    A = projection_matrix(profile, egrid, rp, v3, cfg.order)
    out = A @ np.asarray(f, dtype=float)
    return float(out[0]) if np.ndim(rp) == 0 and np.ndim(v3) == 0 else out


def dos_weights(profile, egrid, grid=None, cfg=ProjectionConfig()):
    """Phase-space volume of each energy bin inside ``r <= r_max``.

    ``w_j = 16 pi^2 int_0^{r_max} r^2 int_{bin_j} sqrt(2 (E + phi(r))) dE dr``.
    The energy integral is done in closed form, leaving
    ``(16 pi^2 / 3) int r^2 [(2(E_j + phi))_+^{3/2} - (2(E_{j-1} + phi))_+^{3/2}] dr``,
    integrated by Gauss-Legendre split at radial edges and at the radii where
    ``phi = -E_j``. Edges below ``-phi(0)`` contribute nothing, which clamps
    them to the potential floor.
    """
    if grid is not None and not np.array_equal(grid.edges, profile.grid.edges):
        raise ValueError("grid does not match the potential profile")
    e = egrid.edges
    r_edges = profile.grid.edges
    targets = -e
    ok = (targets > profile.phi_edges[-1]) & (targets < profile.phi0)
    kinks = _kernels.radii_of_potential(
        np.ascontiguousarray(targets[ok]), profile.grid.edges, profile.rho,
        profile.mass_edges, profile.outer, profile.G, profile.m_total,
        profile.phi_edges, 1e-14 * profile.r_max,
    )
    pts = np.unique(np.concatenate([r_edges, np.atleast_1d(kinks)]))
    a, b = pts[:-1], pts[1:]
    x, wq = gauss_legendre(cfg.order)
    # r = a + (b - a)(2u - u^2): (b - r)^{3/2} kinks at b become smooth in u
    h = (b - a)[:, None]
    r = a[:, None] + h * (2.0 * x - x**2)
    jac = h * 2.0 * (1.0 - x)
    phi = profile._phi(r)
    cube = np.clip(2.0 * (e[None, None, :] + phi[..., None]), 0.0, None) ** 1.5
    integrand = (r**2 * jac)[..., None] * np.diff(cube, axis=-1)
    w = 16.0 * np.pi**2 / 3.0 * np.einsum("q,sqj->j", wq, integrand)
    return np.clip(w, 0.0, None)


def phase_space_norm(f, weights):
    return float(np.dot(weights, f))


def project_pdf(profile, f, egrid, grid, obs, cfg=ProjectionConfig(), weights=None):
    """Normalised projected pdf nu at one observation.

    With ``cfg.convolve_errors`` and a measured ``sigma_v3`` the result is the
    Gauss-Hermite convolution of nu with a Normal(v3, sigma_v3) error density.
    """
    f = np.asarray(f, dtype=float)
    if weights is None:
        weights = dos_weights(profile, egrid, grid, cfg)
    norm = phase_space_norm(f, weights)
    if not norm > 0:
        raise DegenerateModelError("phase-space norm N(rho, f) is zero")
    if cfg.convolve_errors and obs.sigma_v3 is not None:
        t, wt = gauss_hermite(cfg.conv_nodes)
        u = obs.v3 + np.sqrt(2.0) * obs.sigma_v3 * t
        vals = project_pdf_unnorm(profile, f, egrid, grid, np.full(t.size, obs.rp), u, cfg)
        return float(np.dot(wt, vals)) / norm
    return project_pdf_unnorm(profile, f, egrid, grid, obs.rp, obs.v3, cfg) / norm

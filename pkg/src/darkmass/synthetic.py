"""Mock catalogs drawn from analytic isotropic models, with binned truth tables.

Only the Plummer sphere can be sampled: its isotropic DF ``f(E) ~ (-E)^{7/2}``
is exact. The uniform sphere provides density and potential for cross-checks.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .catalog import ObservationSet
from .model import G_CODE

# max of q^2 (1 - q^2)^{7/2}, reached at q^2 = 2/9
_PLUMMER_SPEED_ENVELOPE = (2.0 / 9.0) * (7.0 / 9.0) ** 3.5


@dataclass(frozen=True)
class AnalyticModel:
    kind: str
    mass: float
    scale: float
    G: float = G_CODE

    def __post_init__(self):
        if self.kind not in ("plummer", "uniform"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not (self.mass > 0 and self.scale > 0):
            raise ValueError("mass and scale must be positive")

    @classmethod
    def plummer(cls, mass=1.0, a=1.0, G=G_CODE):
        return cls("plummer", mass, a, G)

    @classmethod
    def uniform(cls, mass=1.0, R=1.0, G=G_CODE):
        return cls("uniform", mass, R, G)


def model_density(model, r):
    r = np.asarray(r, dtype=float)
    M, a = model.mass, model.scale
    if model.kind == "plummer":
        return 3.0 * M / (4.0 * np.pi * a**3) * (1.0 + (r / a) ** 2) ** -2.5
    return np.where(r <= a, 3.0 * M / (4.0 * np.pi * a**3), 0.0)


def model_potential(model, r):
    """Positive potential, ``G M / r`` far away."""
    r = np.asarray(r, dtype=float)
    GM, a = model.G * model.mass, model.scale
    if model.kind == "plummer":
        return GM / np.sqrt(r * r + a * a)
    with np.errstate(divide="ignore"):
        return np.where(r <= a, GM * (3.0 * a * a - r * r) / (2.0 * a**3), GM / np.maximum(r, a))


def model_mass(model, r):
    r = np.asarray(r, dtype=float)
    M, a = model.mass, model.scale
    if model.kind == "plummer":
        return M * r**3 / (r * r + a * a) ** 1.5
    return M * np.minimum(r / a, 1.0) ** 3


def plummer_df(model, E):
    """Isotropic Plummer DF normalised to unit total probability."""
    E = np.asarray(E, dtype=float)
    G, M, a = model.G, model.mass, model.scale
    norm = 24.0 * math.sqrt(2.0) / (7.0 * math.pi**3) * a * a / (G**5 * M**5)
    return np.where(E < 0, norm * np.clip(-E, 0.0, None) ** 3.5, 0.0)


def _plummer_radii(rng, model, n):
    # bisection of M(r)/M = u in t, with r = a tan(t) mapping [0, pi/2) onto [0, inf)
    u = rng.random(n)
    lo = np.zeros(n)
    hi = np.full(n, 0.5 * np.pi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        frac = model_mass(model, model.scale * np.tan(mid)) / model.mass
        below = frac < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return model.scale * np.tan(0.5 * (lo + hi))


def sample_speed(rng, model, r):
    """Speeds at radii ``r`` by rejection from ``p(v) ~ f(v^2/2 - phi) v^2``."""
    if model.kind != "plummer":
        raise NotImplementedError("speed sampling is only available for the Plummer model")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    v_esc = np.sqrt(2.0 * model_potential(model, r))
    q = np.empty(r.size)
    todo = np.arange(r.size)
    while todo.size:
        qq = rng.random(todo.size)
        y = rng.random(todo.size) * _PLUMMER_SPEED_ENVELOPE
        ok = y < qq * qq * (1.0 - qq * qq) ** 3.5
        q[todo[ok]] = qq[ok]
        todo = todo[~ok]
    return q * v_esc


def _isotropic(rng, n):
    cos_t = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    sin_t = np.sqrt(1.0 - cos_t**2)
    return np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=1)


def energy_cut(model, r_max):
    """Binding energy below which every orbit stays inside ``r_max``."""
    return None if r_max is None else -float(model_potential(model, r_max))


def sample_phase_space(rng, model, n, r_max=None):
    """Positions and velocities (n, 3) drawn from the model's isotropic DF.

    With ``r_max`` the DF is truncated at ``E <= -phi(r_max)``, which keeps
    every orbit inside ``r_max`` and leaves the tracer population stationary.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if model.kind != "plummer":
        raise NotImplementedError("phase-space sampling is only available for the Plummer model")
    e_cut = energy_cut(model, r_max)
    xs, vs = [], []
    have = 0
    while have < n:
        m = max(n - have, 16)
        r = _plummer_radii(rng, model, m)
        v = sample_speed(rng, model, r)
        x = r[:, None] * _isotropic(rng, m)
        vel = v[:, None] * _isotropic(rng, m)
        if e_cut is not None:
            keep = 0.5 * v * v - model_potential(model, r) <= e_cut
            x, vel = x[keep], vel[keep]
        xs.append(x)
        vs.append(vel)
        have += x.shape[0]
    return np.concatenate(xs)[:n], np.concatenate(vs)[:n]


def sample_catalog(rng, model, n, sigma_v3=None, r_max=None):
    """Mock (x1, x2, v3) catalog plus the underlying phase-space points.

    ``sigma_v3`` adds Gaussian line-of-sight velocity noise and is recorded
    in the catalog; ``sigma_v3 = 0`` leaves v3 untouched.
    """
    x, v = sample_phase_space(rng, model, n, r_max)
    v3 = v[:, 2].copy()
    sig = None
    if sigma_v3 is not None:
        sig = np.broadcast_to(np.asarray(sigma_v3, dtype=float), (n,)).copy()
        if np.any(sig < 0):
            raise ValueError("sigma_v3 must be non-negative")
        v3 = v3 + sig * rng.standard_normal(n)
    return ObservationSet(x[:, 0], x[:, 1], v3, sig), {"x": x, "v": v}


def binned_density(model, rgrid):
    """Mass-weighted bin averages: shell mass over shell volume."""
    m = model_mass(model, rgrid.edges)
    return np.diff(m) / rgrid.shell_volumes


def binned_df(model, rgrid, egrid, e_cut=None, r_region=None):
    """Truth DF per energy bin, on the same footing as a learnt, normalised f.

    For each bin: the tracer probability in the bin divided by the bin's
    phase-space volume (both restricted to ``r <= r_max`` of ``rgrid`` and
    computed in the true potential), normalised so that the values times
    those volumes sum to one. ``r_region`` overrides the outer radius of the
    modelled region.
    """
    r_max = rgrid.r_max if r_region is None else r_region

    def shell(E_lo, E_hi, weight):
        def inner(r):
            phi = float(model_potential(model, r))
            lo = max(E_lo, -phi)
            hi = E_hi if e_cut is None or weight is None else min(E_hi, e_cut)
            if hi <= lo:
                return 0.0
            if weight is None:
                val = ((2.0 * (hi + phi)) ** 1.5 - (2.0 * (lo + phi)) ** 1.5) / 3.0
            else:
                val = integrate.quad(lambda E: float(plummer_df(model, E)) * math.sqrt(2.0 * (E + phi)),
                                     lo, hi, epsabs=0, epsrel=1e-10)[0]
            return r * r * val

        return 16.0 * np.pi**2 * integrate.quad(inner, 0.0, r_max, limit=200, epsabs=0, epsrel=1e-9)[0]

    e = egrid.edges
    P = np.array([shell(e[j], e[j + 1], "f") for j in range(egrid.n_bins)])
    W = np.array([shell(e[j], e[j + 1], None) for j in range(egrid.n_bins)])
    total = P.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(W > 0, P / (W * total), 0.0)


def truth_tables(model, rgrid, egrid, r_max=None, r_region=None):
    """Binned truth: density on ``rgrid`` and normalised DF on ``egrid``.

    ``r_max`` is the tracer truncation used when sampling; ``r_region`` the
    outer radius of the modelled region (defaults to the grid's last edge).
    """
    return {
        "rho": binned_density(model, rgrid),
        "f": binned_df(model, rgrid, egrid, energy_cut(model, r_max), r_region),
        "r_edges": rgrid.edges,
        "e_edges": egrid.edges,
    }

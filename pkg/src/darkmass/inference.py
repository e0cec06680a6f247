"""Two-block Metropolis-within-Gibbs over the density and DF vectors.

Each iteration first updates the whole density block, then the whole DF block
at the updated density; each block gets one joint Metropolis-Hastings decision.
Proposals are truncated normals centred on the current value, so every state
the chain visits is non-negative and has a non-increasing density.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .model import G_CODE, PotentialProfile, extend_grid, is_valid_density
from .projection import ProjectionConfig, data_matrix, dos_weights

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# truncated normal


def truncnorm_logpdf(x, mean, sd, lower=-np.inf):
    """Log density of Normal(mean, sd^2) conditioned on ``x >= lower``."""
    x = np.asarray(x, dtype=float)
    z = (x - mean) / sd
    alpha = (np.asarray(lower, dtype=float) - mean) / sd
    out = -0.5 * z * z - LOG_SQRT_2PI - np.log(sd) - log_ndtr(-alpha)
    out = np.where(x < lower, -np.inf, out)
    return float(out) if out.ndim == 0 else out


def truncnorm_sample(rng, mean, sd, lower=-np.inf, size=None):
    """Inverse-CDF draw from Normal(mean, sd^2) restricted to ``[lower, inf)``.

    Works on the survival function in log space, so truncation points deep
    in the upper tail stay accurate.
    """
    u = rng.random(size)
    return _truncnorm_from_uniform(u, mean, sd, lower)


def _truncnorm_scalar(u, mean, sd, lower):
    # float-only twin of _truncnorm_from_uniform for the sequential density draw
    z = -ndtri_exp(math.log(u) + log_ndtr((mean - lower) / sd))
    return max(mean + sd * z, lower)


def _truncnorm_logpdf_sum(x, mean, sd, lower):
    if np.any(x < lower):
        return -np.inf
    z = (x - mean) / sd
    alpha = (lower - mean) / sd
    return float(np.sum(-0.5 * z * z - np.log(sd) - log_ndtr(-alpha)) - x.size * LOG_SQRT_2PI)


def _truncnorm_from_uniform(u, mean, sd, lower):
    alpha = (np.asarray(lower, dtype=float) - mean) / sd
    z = -ndtri_exp(np.log(u) + log_ndtr(-alpha))
    x = mean + sd * z
    # rounding can land a hair below the bound
    x = np.maximum(x, lower)
    return float(x) if np.ndim(x) == 0 else x


# --------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class PriorSpec:
    rho_seeds: np.ndarray
    rho_prior_sd: np.ndarray
    f_seed: float
    f_prior_sd: float

    def __post_init__(self):
        seeds = np.asarray(self.rho_seeds, dtype=float)
        sd = np.broadcast_to(np.asarray(self.rho_prior_sd, dtype=float), seeds.shape).copy()
        if np.any(sd <= 0) or not self.f_prior_sd > 0:
            raise ValueError("prior standard deviations must be positive")
        if not is_valid_density(seeds):
            raise ValueError("density seeds must be non-negative and non-increasing")
        if self.f_seed < 0:
            raise ValueError("DF seed must be non-negative")
        object.__setattr__(self, "rho_seeds", seeds)
        object.__setattr__(self, "rho_prior_sd", sd)

    @classmethod
    def default(cls, rho_seeds, egrid, *, sd_factor=10.0, rho_sd_floor=1.0):
        """Broad priors: density sd is ``sd_factor`` times the largest seed,
        DF seed ``1 / (N_E |E_0|)`` with sd ``sd_factor`` times that."""
        seeds = np.asarray(rho_seeds, dtype=float)
        rho_sd = max(sd_factor * float(np.max(seeds)), rho_sd_floor)
        f_seed = 1.0 / (egrid.n_bins * abs(egrid.edges[0]))
        return cls(seeds, np.full(seeds.shape, rho_sd), f_seed, sd_factor * f_seed)


@dataclass(frozen=True)
class ProposalSpec:
    rho_step_sd: np.ndarray
    f_step_sd: np.ndarray
    adapt: bool = True
    adapt_target: float = 0.234
    adapt_interval: int = 100
    adapt_factor: float = 0.01

    def __post_init__(self):
        sd = np.asarray(self.rho_step_sd, dtype=float)
        if np.any(sd <= 0) or np.any(np.asarray(self.f_step_sd) <= 0):
            raise ValueError("proposal scales must be positive")
        if not 0 < self.adapt_target < 1:
            raise ValueError("adapt_target must lie in (0, 1)")
        object.__setattr__(self, "rho_step_sd", sd)
        object.__setattr__(self, "f_step_sd", np.asarray(self.f_step_sd, dtype=float))


def initial_df(energies, egrid, weights, f_seed, floor=1e-3):
    """Starting DF: counts of empirical energies per bin over phase volume.

    Rescaled to mean ``f_seed`` and floored at ``floor`` times its maximum so
    every bin starts positive. Per-bin proposal scales proportional to it
    match the DF's spread over several decades.
    """
    counts = np.histogram(np.asarray(energies, dtype=float), egrid.edges)[0].astype(float)
    weights = np.asarray(weights, dtype=float)
    est = np.divide(counts, weights, out=np.zeros_like(counts), where=weights > 0)
    if not est.max() > 0:
        return np.full(egrid.n_bins, float(f_seed))
    est = est / est.mean() * f_seed
    return np.maximum(est, floor * est.max())


# --------------------------------------------------------------------------
# densities


def _gauss_logpdf_sum(x, mean, sd):
    z = (x - mean) / sd
    return float(-0.5 * np.dot(z, z) - np.sum(np.log(sd)) - x.size * LOG_SQRT_2PI)


def log_prior_rho(rho, spec):
    if not (np.all(rho[1:] <= rho[:-1]) and rho[-1] >= 0):
        return -np.inf
    return _gauss_logpdf_sum(rho, spec.rho_seeds, spec.rho_prior_sd)


def log_prior_f(f, spec):
    if np.any(f < 0):
        return -np.inf
    z = (f - spec.f_seed) / spec.f_prior_sd
    return float(-0.5 * np.dot(z, z) - f.size * (math.log(spec.f_prior_sd) + LOG_SQRT_2PI))


def log_prior(rho, f, spec):
    """Independent Gaussian priors restricted to the constraint set."""
    rho = np.asarray(rho, dtype=float)
    f = np.asarray(f, dtype=float)
    return log_prior_rho(rho, spec) + log_prior_f(f, spec)


class ProjectedLikelihood:
    """Log-likelihood of a catalog: the sum of log nu over all tracers.

    ``prepare(rho)`` does all the density-dependent work (potential, projection
    matrix, density-of-states weights); ``evaluate(cache, f)`` is then cheap.

    The modelled tracer region reaches ``los_extra`` outer-bin widths beyond
    the last radial edge (see :func:`~darkmass.model.extend_grid`); without
    it the outermost tracer, which sits on that edge, has zero probability.
    """

    def __init__(self, data, rgrid, egrid, cfg=ProjectionConfig(), G=G_CODE, los_extra=1.0):
        if len(data) == 0:
            raise ValueError("log-likelihood needs at least one datum")
        self.data = data
        self.rgrid = rgrid
        self.egrid = egrid
        self.cfg = cfg
        self.G = G
        self.los_extra = los_extra
        self.model_grid = extend_grid(rgrid, los_extra)

    def profile(self, rho):
        rho = np.asarray(rho, dtype=float)
        pad = self.model_grid.n_bins - rho.size
        return PotentialProfile(np.concatenate([rho, np.zeros(pad)]), self.model_grid, self.G)

    def prepare(self, rho):
        profile = self.profile(rho)
        A = data_matrix(profile, self.egrid, self.data, self.cfg)
        w = dos_weights(profile, self.egrid, None, self.cfg)
        return profile, A, w

    def evaluate(self, cache, f):
        _, A, w = cache
        norm = float(np.dot(w, f))
        if not norm > 0:
            return -np.inf
        nu = A @ f
        if np.any(nu <= 0):
            return -np.inf
        return float(np.sum(np.log(nu))) - nu.size * math.log(norm)

    def norm(self, cache, f):
        """Phase-space norm ``w . f``; f divided by it is scale-free."""
        return float(np.dot(cache[2], f))

    def nu(self, rho, f):
        """Normalised projected pdf at every datum."""
        _, A, w = self.prepare(rho)
        f = np.asarray(f, dtype=float)
        return (A @ f) / float(np.dot(w, f))


class FlatLikelihood:
    """Constant likelihood; the chain then samples the constrained prior."""

    def prepare(self, rho):
        return None

    def evaluate(self, cache, f):
        return 0.0

    def norm(self, cache, f):
        return float("nan")


def log_likelihood(rho, f, rgrid, egrid, data, cfg=ProjectionConfig(), G=G_CODE, los_extra=1.0):
    like = ProjectedLikelihood(data, rgrid, egrid, cfg, G, los_extra)
    return like.evaluate(like.prepare(np.asarray(rho, dtype=float)), np.asarray(f, dtype=float))


# --------------------------------------------------------------------------
# proposals


def propose_rho_block(rng, rho, step_sd):
    """Descending truncated-normal proposal for the density block.

    ``rho'_N ~ TN(rho_N, sd_N; >= 0)`` then ``rho'_i ~ TN(rho_i, sd_i; >= rho'_{i+1})``.
    The reverse density applies the same construction from ``rho'`` back to
    ``rho``, truncating at the old values.

    Returns ``(rho', log q(rho'|rho), log q(rho|rho'))``.
    """
    rho = np.asarray(rho, dtype=float)
    sd = np.broadcast_to(step_sd, rho.shape)
    n = rho.size
    u = rng.random(n).tolist()
    rho_l, sd_l = rho.tolist(), sd.tolist()
    new_l = [0.0] * n
    lower = 0.0
    for i in range(n - 1, -1, -1):
        lower = new_l[i] = _truncnorm_scalar(u[i], rho_l[i], sd_l[i], lower)
    new = np.array(new_l)
    fwd_lower = np.zeros(n)
    fwd_lower[:-1] = new[1:]
    rev_lower = np.zeros(n)
    rev_lower[:-1] = rho[1:]
    log_fwd = _truncnorm_logpdf_sum(new, rho, sd, fwd_lower)
    log_rev = _truncnorm_logpdf_sum(rho, new, sd, rev_lower)
    return new, log_fwd, log_rev


def propose_f_block(rng, f, step_sd):
    """Independent ``TN(f_j, sd_j; >= 0)`` proposals for the DF block."""
    f = np.asarray(f, dtype=float)
    step_sd = np.broadcast_to(step_sd, f.shape)
    new = np.atleast_1d(truncnorm_sample(rng, f, step_sd, 0.0, size=f.shape))
    log_fwd = _truncnorm_logpdf_sum(new, f, step_sd, 0.0)
    log_rev = _truncnorm_logpdf_sum(f, new, step_sd, 0.0)
    return new, log_fwd, log_rev


# --------------------------------------------------------------------------
# chain


@dataclass
class ChainState:
    rho: np.ndarray
    f: np.ndarray
    lp_rho: float
    lp_f: float
    log_like: float
    cache: object = None

    @property
    def log_prior(self):
        return self.lp_rho + self.lp_f

    @property
    def log_post(self):
        return self.lp_rho + self.lp_f + self.log_like


def initial_state(rho, f, likelihood, prior):
    rho = np.array(rho, dtype=float)
    f = np.array(f, dtype=float)
    if not is_valid_density(rho) or np.any(f < 0):
        raise ValueError("initial state violates the density/DF constraints")
    if rho.shape != prior.rho_seeds.shape:
        raise ValueError("initial density does not match the prior")
    cache = likelihood.prepare(rho)
    return ChainState(rho, f, log_prior_rho(rho, prior), log_prior_f(f, prior),
                      likelihood.evaluate(cache, f), cache)


def log_posterior(rho, f, likelihood, prior):
    """Log posterior recomputed from scratch (no cached state)."""
    lp = log_prior(rho, f, prior)
    if lp == -np.inf:
        return lp
    return lp + likelihood.evaluate(likelihood.prepare(np.asarray(rho, dtype=float)), f)


def _accept(rng, log_ratio):
    # one uniform per decision keeps the random stream aligned across runs
    u = rng.random()
    if log_ratio == -np.inf or math.isnan(log_ratio):
        return False
    return log_ratio >= 0 or math.log(u) < log_ratio


def gibbs_iteration(rng, state, likelihood, prior, rho_step_sd, f_step_sd, hastings=True):
    """One sweep: density block, then DF block at the updated density.

    Returns ``(new_state, rho_accepted, f_accepted)``. ``hastings=False``
    drops the proposal-density correction; it exists only to demonstrate
    the resulting bias.
    """
    rho_new, lq_fwd, lq_rev = propose_rho_block(rng, state.rho, rho_step_sd)
    lp_new = log_prior_rho(rho_new, prior)
    cache = likelihood.prepare(rho_new)
    ll_new = likelihood.evaluate(cache, state.f)
    log_ratio = (lp_new + ll_new) - (state.lp_rho + state.log_like)
    if hastings:
        log_ratio += lq_rev - lq_fwd
    acc_rho = _accept(rng, log_ratio)
    if acc_rho:
        state = ChainState(rho_new, state.f, lp_new, state.lp_f, ll_new, cache)

    f_new, lq_fwd, lq_rev = propose_f_block(rng, state.f, f_step_sd)
    lp_new = log_prior_f(f_new, prior)
    ll_new = likelihood.evaluate(state.cache, f_new)
    log_ratio = (lp_new + ll_new) - (state.lp_f + state.log_like)
    if hastings:
        log_ratio += lq_rev - lq_fwd
    acc_f = _accept(rng, log_ratio)
    if acc_f:
        state = ChainState(state.rho, f_new, state.lp_rho, lp_new, ll_new, state.cache)
    return state, acc_rho, acc_f


@dataclass
class Chain:
    rho: np.ndarray
    f: np.ndarray
    log_post: np.ndarray
    log_like: np.ndarray
    iterations: np.ndarray
    norm: np.ndarray
    seed: Optional[int]
    n_iter: int
    burn_in: int
    thin: int
    accepted_rho: int = 0
    accepted_f: int = 0
    rho_step_sd: np.ndarray = field(default_factory=lambda: np.empty(0))
    f_step_sd: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_samples(self):
        return self.log_post.size

    @property
    def acceptance(self):
        return self.accepted_rho / self.n_iter, self.accepted_f / self.n_iter


def run_chain(seed, init_rho, init_f, likelihood, prior, proposal, n_iter, burn_in=0, thin=1,
              hastings=True, progress=None):
    """Run ``n_iter`` Gibbs sweeps and keep every ``thin``-th post-burn-in state.

    While adapting (burn-in only) each block's step scale is multiplied by
    ``exp(+adapt_factor)`` or ``exp(-adapt_factor)`` every ``adapt_interval``
    sweeps, depending on whether the block's recent acceptance is above or
    below ``adapt_target``. Scales are frozen after burn-in.
    """
    if not n_iter > burn_in >= 0:
        raise ValueError("need n_iter > burn_in >= 0")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    rng = np.random.default_rng(seed)
    state = initial_state(init_rho, init_f, likelihood, prior)
    if not state.log_post > -np.inf:
        raise ValueError("initial state has zero posterior density")
    rho_sd = np.array(proposal.rho_step_sd, dtype=float)
    f_sd = np.broadcast_to(proposal.f_step_sd, np.shape(init_f)).astype(float)
    n_keep = (n_iter - burn_in) // thin
    out_rho = np.empty((n_keep, state.rho.size))
    out_f = np.empty((n_keep, state.f.size))
    out_lp = np.empty(n_keep)
    out_ll = np.empty(n_keep)
    out_norm = np.empty(n_keep)
    out_it = np.empty(n_keep, dtype=np.int64)
    acc_rho = acc_f = 0
    win_rho = win_f = 0
    step = math.exp(proposal.adapt_factor)
    kept = 0
    for it in range(n_iter):
        state, a_r, a_f = gibbs_iteration(rng, state, likelihood, prior, rho_sd, f_sd, hastings)
        acc_rho += a_r
        acc_f += a_f
        win_rho += a_r
        win_f += a_f
        if it < burn_in and proposal.adapt and (it + 1) % proposal.adapt_interval == 0:
            rate_rho = win_rho / proposal.adapt_interval
            rate_f = win_f / proposal.adapt_interval
            rho_sd = rho_sd * (step if rate_rho > proposal.adapt_target else 1.0 / step)
            f_sd = f_sd * (step if rate_f > proposal.adapt_target else 1.0 / step)
            win_rho = win_f = 0
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            out_rho[kept] = state.rho
            out_f[kept] = state.f
            out_lp[kept] = state.log_post
            out_ll[kept] = state.log_like
            out_norm[kept] = likelihood.norm(state.cache, state.f)
            out_it[kept] = it + 1
            kept += 1
        if progress is not None:
            progress(it)
    return Chain(out_rho, out_f, out_lp, out_ll, out_it, out_norm, seed, n_iter, burn_in, thin,
                 acc_rho, acc_f, rho_sd, f_sd)


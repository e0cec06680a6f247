"""Bayesian inference of a spherical mass density and an isotropic DF from
sky positions and line-of-sight velocities of tracers."""

from .binning import (
    BinningResult,
    bin_catalog,
    choose_energy_bins,
    choose_rp_bins,
    empirical_energies,
    empirical_potential,
)
from .catalog import CatalogError, Observation, ObservationSet, load_catalog, write_catalog
from .inference import (
    Chain,
    FlatLikelihood,
    PriorSpec,
    ProjectedLikelihood,
    ProposalSpec,
    gibbs_iteration,
    log_likelihood,
    log_posterior,
    run_chain,
)
from .model import (
    G_ASTRO,
    G_CODE,
    EnergyGrid,
    PhasePoint,
    PotentialProfile,
    RadialGrid,
    enclosed_mass,
    energy,
    potential,
    radius_of_potential,
)
from .projection import (
    DegenerateModelError,
    ProjectionConfig,
    dos_weights,
    inner_velocity_integral,
    project_pdf,
    project_pdf_unnorm,
)
from .report import enclosed_mass_summary, gelman_rubin, hpd_interval, marginal_mode
from .synthetic import AnalyticModel, sample_catalog, truth_tables

__version__ = "0.1.0"

"""End-to-end runs: config, binning, chains, summaries and artifacts on disk.

Output directory layout::

    config_resolved.json   every config key plus the chosen grids and seeds
    chain_<k>.csv          iteration, rho_*, f_*, log_post, norm (one row per stored state)
    chains.json            per-chain acceptance and final proposal scales
    summary.json           HPD / mode / mean / ESS / R-hat per parameter
    hpd_plot.svg           density and DF panels
    trace_<param>.svg      one trace per parameter
    FAILED                 only on failure: the stage and the error

``summary.json`` is always computed from the files on disk, so
:func:`summarize_dir` on a finished run reproduces it byte for byte.
"""

import csv
import dataclasses
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .binning import bin_catalog
from .catalog import load_catalog
from .inference import (
    PriorSpec,
    ProjectedLikelihood,
    ProposalSpec,
    initial_df,
    run_chain,
)
from .model import G_ASTRO, G_CODE
from .projection import ProjectionConfig
from .report import (
    enclosed_mass_summary,
    hpd_plot_svg,
    parameter_summary,
    trace_svg,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

RHAT_WARN = 1.1

UNITS = {
    "code": {"G": G_CODE, "mass": "code mass", "length": "code length"},
    "astro": {"G": G_ASTRO, "mass": "M_sun", "length": "kpc"},
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


@dataclass
class RunConfig:
    catalog: str = ""
    out_dir: str = "darkmass_out"
    units: str = "code"
    # projection
    quad_order: int = 16
    convolve_errors: bool = False
    conv_nodes: int = 11
    los_extra: float = 1.0
    # binning
    raw_counts: bool = False
    safety: float = 1.1
    # priors
    prior_sd_factor: float = 10.0
    rho_sd_floor: float = 1.0
    # proposals
    rho_step_frac: float = 0.1
    f_step_frac: float = 0.1
    f_init: str = "histogram"
    adapt: bool = True
    adapt_target: float = 0.234
    adapt_interval: int = 100
    adapt_factor: float = 0.01
    # chains
    n_iter: int = 200_000
    burn_in: int = 100_000
    thin: int = 10
    seed: int = 12345
    n_chains: int = 2
    hpd_mass: float = 0.95

    def validate(self):
        """Raise :class:`ConfigError` on the first bad value."""
        if not self.catalog:
            raise ConfigError("catalog path is required")
        if self.units not in UNITS:
            raise ConfigError(f"units must be one of {sorted(UNITS)}")
        if self.f_init not in ("histogram", "seed"):
            raise ConfigError("f_init must be 'histogram' or 'seed'")
        if not self.n_iter > self.burn_in >= 0:
            raise ConfigError(f"need n_iter > burn_in >= 0 (got n_iter={self.n_iter}, burn_in={self.burn_in})")
        if self.thin < 1 or (self.n_iter - self.burn_in) // self.thin < 20:
            raise ConfigError("thin must be >= 1 and leave at least 20 stored states per chain")
        if self.n_chains < 1:
            raise ConfigError("n_chains must be >= 1")
        if self.quad_order < 2 or self.conv_nodes < 1 or self.adapt_interval < 1:
            raise ConfigError("quad_order >= 2, conv_nodes >= 1 and adapt_interval >= 1 are required")
        positive = ("safety", "prior_sd_factor", "rho_sd_floor", "rho_step_frac", "f_step_frac", "adapt_factor")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.los_extra < 0:
            raise ConfigError("los_extra must be >= 0")
        if not 0 < self.adapt_target < 1 or not 0 < self.hpd_mass < 1:
            raise ConfigError("adapt_target and hpd_mass must lie in (0, 1)")
        return self

    @property
    def G(self):
        return UNITS[self.units]["G"]

    def projection(self):
        return ProjectionConfig(self.quad_order, self.conv_nodes, self.convolve_errors)

    def to_dict(self):
        return dataclasses.asdict(self)


def _coerce(name, typ, text):
    if typ is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {text!r}")
    try:
        if typ is int:
            return int(float(text)) if float(text).is_integer() else int(text)
        return typ(text)
    except ValueError:
        raise ConfigError(f"{name}: expected {typ.__name__}, got {text!r}") from None


def parse_config(text, base_dir=None):
    """Parse flat ``key = value`` lines (``#`` starts a comment).

    A relative ``catalog`` or ``out_dir`` is resolved against ``base_dir``.
    """
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    types = {k: {"int": int, "float": float, "bool": bool, "str": str}.get(v, v) for k, v in types.items()}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], val)
    cfg = RunConfig(**values)
    if base_dir is not None:
        for key in ("catalog", "out_dir"):
            p = getattr(cfg, key)
            if p and not os.path.isabs(p):
                setattr(cfg, key, str(Path(base_dir) / p))
    return cfg


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def worker_count(n_chains):
    cap = os.environ.get("DARKMASS_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            pass
    return max(1, min(n_chains, limit))


def chain_seeds(seed, n_chains):
    """Independent per-chain seeds spawned from the run seed."""
    kids = np.random.SeedSequence(seed).spawn(n_chains)
    return [int(k.generate_state(1, np.uint64)[0]) for k in kids]


# --------------------------------------------------------------------------
# setup


@dataclass
class RunSetup:
    likelihood: ProjectedLikelihood
    prior: PriorSpec
    proposal: ProposalSpec
    init_rho: np.ndarray
    init_f: np.ndarray
    binning: object


def prepare_run(cfg, data):
    """Binning, default priors, starting point and proposal scales."""
    b = bin_catalog(data, cfg.G, raw_counts=cfg.raw_counts, safety=cfg.safety)
    like = ProjectedLikelihood(data, b.rgrid, b.egrid, cfg.projection(), cfg.G, cfg.los_extra)
    prior = PriorSpec.default(b.table.rho, b.egrid, sd_factor=cfg.prior_sd_factor, rho_sd_floor=cfg.rho_sd_floor)
    init_rho = b.table.rho.copy()
    if cfg.f_init == "histogram":
        w = like.prepare(init_rho)[2]
        init_f = initial_df(b.energies, b.egrid, w, prior.f_seed)
    else:
        init_f = np.full(b.egrid.n_bins, prior.f_seed)
    proposal = ProposalSpec(cfg.rho_step_frac * init_rho, cfg.f_step_frac * init_f, cfg.adapt,
                            cfg.adapt_target, cfg.adapt_interval, cfg.adapt_factor)
    return RunSetup(like, prior, proposal, init_rho, init_f, b)


def _run_one(args):
    seed, setup, cfg = args
    return run_chain(seed, setup.init_rho, setup.init_f, setup.likelihood, setup.prior, setup.proposal,
                     cfg.n_iter, cfg.burn_in, cfg.thin)


def run_chains(cfg, setup, seeds):
    jobs = [(s, setup, cfg) for s in seeds]
    workers = worker_count(len(seeds))
    if workers == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


# --------------------------------------------------------------------------
# files


def param_names(n_rho, n_f):
    return [f"rho_{i + 1}" for i in range(n_rho)] + [f"f_{j + 1}" for j in range(n_f)]


def write_chain_csv(chain, path):
    names = param_names(chain.rho.shape[1], chain.f.shape[1])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["iteration"] + names + ["log_post", "norm"]) + "\n")
        for k in range(chain.n_samples):
            vals = [repr(float(v)) for v in np.concatenate([chain.rho[k], chain.f[k]])]
            vals += [repr(float(chain.log_post[k])), repr(float(chain.norm[k]))]
            fh.write(f"{int(chain.iterations[k])}," + ",".join(vals) + "\n")


def read_chain_csv(path):
    """Columns of a chain file as a dict of arrays, keyed by header name."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def _json_dump(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def _chain_files(out_dir):
    files = sorted(Path(out_dir).glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise FileNotFoundError(f"no chain_<k>.csv files in {out_dir}")
    return files


# --------------------------------------------------------------------------
# summaries


def _stack(chains, name):
    n = min(c[name].size for c in chains)
    return np.array([c[name][:n] for c in chains])


def build_summary(chains, resolved, chain_meta=None):
    """Summary table from chain columns (list of dicts) and the resolved config."""
    r_edges = np.asarray(resolved["r_edges"])
    e_edges = np.asarray(resolved["e_edges"])
    n_rho, n_f = r_edges.size - 1, e_edges.size - 1
    mass = resolved["config"]["hpd_mass"]
    units = UNITS[resolved["config"]["units"]]
    rows = {"rho": [], "f": [], "f_norm": []}
    warn = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for i in range(n_rho):
            rows["rho"].append(parameter_summary(f"rho_{i + 1}", _stack(chains, f"rho_{i + 1}"), mass))
        norm = _stack(chains, "norm")
        for j in range(n_f):
            raw = _stack(chains, f"f_{j + 1}")
            rows["f"].append(parameter_summary(f"f_{j + 1}", raw, mass))
            if np.all(np.isfinite(norm)) and np.all(norm > 0):
                rows["f_norm"].append(parameter_summary(f"f_norm_{j + 1}", raw / norm, mass))
    warn += [str(w.message) for w in caught]
    for group in rows.values():
        for row in group:
            if row["rhat"] is not None and row["rhat"] > RHAT_WARN:
                warn.append(f"{row['name']}: R-hat {row['rhat']:.3f} > {RHAT_WARN}")

    lp = _stack(chains, "log_post")
    c_best, k_best = np.unravel_index(int(np.argmax(lp)), lp.shape)
    best = chains[c_best]
    map_state = {
        "chain": int(c_best),
        "iteration": int(best["iteration"][k_best]),
        "log_post": float(best["log_post"][k_best]),
        "rho": [float(best[f"rho_{i + 1}"][k_best]) for i in range(n_rho)],
        "f": [float(best[f"f_{j + 1}"][k_best]) for j in range(n_f)],
    }
    em = enclosed_mass_summary(_stack(chains, "rho_1").ravel(), float(r_edges[1]), mass)
    em["units"] = units["mass"]
    em["r1_units"] = units["length"]
    out = {
        "hpd_mass": mass,
        "n_chains": len(chains),
        "n_samples_per_chain": int(lp.shape[1]),
        "r_edges": [float(x) for x in r_edges],
        "e_edges": [float(x) for x in e_edges],
        "rho": rows["rho"],
        "f": rows["f"],
        "f_norm": rows["f_norm"],
        "map": map_state,
        "enclosed_mass": em,
        "warnings": warn,
    }
    if chain_meta is not None:
        out["chains"] = chain_meta
    return out


def write_figures(summary, chains, out_dir):
    r_edges, e_edges = summary["r_edges"], summary["e_edges"]
    f_rows = summary["f_norm"] or summary["f"]
    label = "f / (w . f)" if summary["f_norm"] else "f"
    Path(out_dir, "hpd_plot.svg").write_text(hpd_plot_svg(summary["rho"], f_rows, r_edges, e_edges, label),
                                             encoding="utf-8")
    names = [r["name"] for r in summary["rho"] + summary["f"]] + ["log_post"]
    for name in names:
        Path(out_dir, f"trace_{name}.svg").write_text(trace_svg(name, [c[name] for c in chains]),
                                                      encoding="utf-8")


def summarize_dir(out_dir, write=True):
    """Recompute ``summary.json`` (and figures) from the files in ``out_dir``."""
    out_dir = Path(out_dir)
    resolved = json.loads((out_dir / "config_resolved.json").read_text(encoding="utf-8"))
    meta_path = out_dir / "chains.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else None
    chains = [read_chain_csv(p) for p in _chain_files(out_dir)]
    summary = build_summary(chains, resolved, meta)
    if write:
        _json_dump(summary, out_dir / "summary.json")
        write_figures(summary, chains, out_dir)
    return summary


# --------------------------------------------------------------------------
# orchestration


def _log(msg):
    print(msg, file=sys.stderr)


def run_pipeline(cfg, log=_log):
    """Run every stage; returns an exit status (0 ok, 1 stage failure, 2 bad config)."""
    try:
        cfg.validate()
    except ConfigError as exc:
        log(f"[config] {exc}")
        return EXIT_USAGE
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = out_dir / "FAILED"
    if failed.exists():
        failed.unlink()
    stage = "load"
    try:
        data = load_catalog(cfg.catalog)
        stage = "binning"
        setup = prepare_run(cfg, data)
        b = setup.binning
        seeds = chain_seeds(cfg.seed, cfg.n_chains)
        resolved = {
            "config": cfg.to_dict(),
            "G": cfg.G,
            "n_data": len(data),
            "r_edges": [float(x) for x in b.rgrid.edges],
            "e_edges": [float(x) for x in b.egrid.edges],
            "model_r_max": setup.likelihood.model_grid.r_max,
            "histogram_scale": b.scale,
            "chain_seeds": seeds,
            "init_rho": [float(x) for x in setup.init_rho],
            "init_f": [float(x) for x in setup.init_f],
        }
        _json_dump(resolved, out_dir / "config_resolved.json")
        log(f"[binning] N_X={b.rgrid.n_bins} N_E={b.egrid.n_bins} E_0={b.egrid.edges[0]:.6g}")
        stage = "sampling"
        log(f"[sampling] {cfg.n_chains} chain(s) x {cfg.n_iter} iterations "
            f"on {worker_count(cfg.n_chains)} worker(s)")
        chains = run_chains(cfg, setup, seeds)
        stage = "output"
        meta = []
        for k, ch in enumerate(chains):
            write_chain_csv(ch, out_dir / f"chain_{k}.csv")
            acc_r, acc_f = ch.acceptance
            meta.append({"seed": seeds[k], "acceptance_rho": acc_r, "acceptance_f": acc_f,
                         "rho_step_sd": [float(x) for x in ch.rho_step_sd],
                         "f_step_sd": [float(x) for x in ch.f_step_sd]})
        _json_dump(meta, out_dir / "chains.json")
        stage = "summary"
        summary = summarize_dir(out_dir)
        for w in summary["warnings"]:
            log(f"[summary] warning: {w}")
        em = summary["enclosed_mass"]
        log(f"[summary] innermost-bin mass (r < {em['r1']:.4g} {em['r1_units']}): mode {em['mode']:.4g} "
            f"{em['units']}, 95% HPD [{em['hpd_lower']:.4g}, {em['hpd_upper']:.4g}]")
    except Exception as exc:  # noqa: BLE001 - any stage failure is reported, not raised
        err = StageError(stage, exc)
        failed.write_text(str(err) + "\n", encoding="utf-8")
        log(str(err))
        return EXIT_FAILED
    return EXIT_OK

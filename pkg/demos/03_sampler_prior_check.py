"""
Checking the sampler against its own prior
==========================================

With the likelihood switched off, the chain should reproduce the constrained
prior: Gaussians restricted to a non-increasing, non-negative density and a
non-negative DF. Dropping the proposal-density correction breaks this.
"""

import numpy as np
from scipy import stats

from darkmass.inference import FlatLikelihood, PriorSpec, ProposalSpec, run_chain
from darkmass.report import effective_sample_size

seeds = np.array([1.0, 0.8, 0.6])
prior = PriorSpec(seeds, 1.0, 1.0, 1.0)
proposal = ProposalSpec(np.ones(3), 1.0, adapt=False)

# Exact draws by rejection.
rng = np.random.default_rng(0)
x = rng.normal(seeds, 1.0, size=(2_000_000, 3))
exact = x[np.all(np.diff(x, axis=1) <= 0, axis=1) & (x[:, -1] >= 0)]
print(f"{len(exact)} exact prior draws")

for hastings in (True, False):
    chain = run_chain(5, seeds, np.ones(2), FlatLikelihood(), prior, proposal,
                      n_iter=200_000, burn_in=2000, thin=20, hastings=hastings)
    print(f"\nHastings correction {'on' if hastings else 'off'}, acceptance {chain.acceptance}")
    for i in range(3):
        d = stats.ks_2samp(chain.rho[:, i], exact[:, i]).statistic
        ess = effective_sample_size(chain.rho[:, i])
        crit = 1.628 * np.sqrt(1 / ess + 1 / len(exact))
        print(f"  rho_{i + 1}: mean {chain.rho[:, i].mean():.3f} vs {exact[:, i].mean():.3f}, "
              f"KS {d:.4f} vs 1% critical {crit:.4f}")

# %% [markdown]
# # Correlated defaults in one period
#
# Node k defaults when its latent Gaussian falls below the inverse normal of
# its default probability. With one period and no exposures the Monte Carlo
# engine is the textbook one-factor model, so the joint default frequency of
# two nodes should match the bivariate normal CDF at the two thresholds.

# %%
import numpy as np

from pdmodel.engine import SimulationConfig, run_simulation
from pdmodel.kernel import default_correlation, implied_double_default_pd
from pdmodel.model import BankNode, ExposureNetwork

n = 2_000_000
for pd in (0.001, 0.05):
    banks = [BankNode(k, str(k), 100.0, 10.0, pd) for k in range(2)]
    for rho in (0.0, 0.5, 0.9):
        dist = run_simulation(banks, ExposureNetwork.empty(2), SimulationConfig(periods=1, n_paths=n, seed=1, rho=rho))
        both = np.mean(np.all(dist.default_time == 1, axis=1))
        exact = implied_double_default_pd(pd, pd, rho)
        se = np.sqrt(exact * (1 - exact) / n)
        print(f"pd={pd:<6} rho={rho:<4} MC {both:.3e}  exact {exact:.3e}  z={(both - exact) / se:+.2f}")

# %% [markdown]
# Latent correlation is not default correlation. For rare defaults the
# latter is much smaller.

# %%
for rho in (0.25, 0.5, 0.75, 0.95):
    pij = implied_double_default_pd(0.001, 0.001, rho)
    print(rho, round(default_correlation(0.001, 0.001, pij), 4))

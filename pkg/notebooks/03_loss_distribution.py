# %% [markdown]
# # Loss distribution of a 35-bank system
#
# The bundled table holds twelve named banks with published capital, size
# and default probability plus 23 synthetic ones. Bilateral exposures are
# not public; we reconstruct them from each bank's aggregate interbank
# assets and liabilities and then simulate seven yearly periods.

# %%
import numpy as np

from pdmodel.engine import SimulationConfig, run_simulation
from pdmodel.inference import InferenceConfig, generate_ensemble
from pdmodel.io import bundled, load_banks
from pdmodel.measures import summarize

banks, marginals = load_banks(bundled("gsib_like.csv"), rating_map=bundled("rating_map.csv"))
net = generate_ensemble(marginals, InferenceConfig(ensemble_size=1))[0].network
a_glob = sum(b.total_asset for b in banks)
print(len(banks), "banks, total assets", round(a_glob, 1), "bn EUR")

# %% [markdown]
# Merton and linear PD updates, rho = 0.5.

# %%
runs = {}
for rule in ("merton", "linear"):
    runs[rule] = run_simulation(banks, net, SimulationConfig(rule=rule, rho=0.5, n_paths=50_000, seed=0))
    s = summarize(runs[rule])
    print(f"{rule:7s} mean {s.mean:8.1f} bn = {s.mean / a_glob:.2%} of assets, "
          f"99.9% quantile {s.quantiles[0.999]:.0f}, paths without loss {s.zero_count}")

# %% [markdown]
# Log-binned histogram, zero losses counted on the side.

# %%
s = summarize(runs["merton"], bins=12)
for lo, hi, c in zip(s.bin_edges[:-1], s.bin_edges[1:], s.counts):
    print(f"{lo:9.1f} - {hi:9.1f}  {c}")

# %% [markdown]
# ## Thin capital flips the tail
#
# Extreme losses (above 30% of the maximum) grow with correlation when banks
# are well capitalised and shrink with it once capital is halved.

# %%
half, _ = load_banks(bundled("gsib_like.csv"), rating_map=bundled("rating_map.csv"), capital_scale=0.5)
for label, bs in (("full", banks), ("half", half)):
    tail = []
    for rho in (0.25, 0.75):
        d = run_simulation(bs, net, SimulationConfig(rho=rho, n_paths=50_000, seed=0))
        tail.append(np.mean(d.total > 0.3 * d.max_loss))
    print(label, "capital: tail mass", np.round(tail, 5))

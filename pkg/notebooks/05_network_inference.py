# %% [markdown]
# # Rebuilding a lending network from its margins
#
# Borrowers, smallest first, take fixed-size loans from lenders drawn with
# probability proportional to their remaining assets raised to alpha. Rows
# and columns of the result add up to the given totals and nobody lends to
# itself.

# %%
import numpy as np

from pdmodel.inference import AggregateMarginals, InferenceConfig, generate_ensemble, infer_network
from pdmodel.io import bundled, load_banks

m = AggregateMarginals([5.0, 3.0, 8.0, 2.0, 6.0], [4.0, 6.0, 5.0, 6.0, 3.0])
res = infer_network(m, InferenceConfig(seed=1, min_loan_fraction=0.25))
np.set_printoptions(precision=3, suppress=True)
print(res.network.a)
print("row sums", res.network.a.sum(axis=1), "col sums", res.network.a.sum(axis=0), "re-routed", res.reroutes)

# %% [markdown]
# Alpha controls concentration: larger lenders win more of the draws, so
# loans gather on fewer, bigger edges.

# %%
banks, marg = load_banks(bundled("gsib_like.csv"), rating_map=bundled("rating_map.csv"))
big = int(np.argmax(marg.assets))
for alpha in (0.0, 1.0, 2.0):
    ens = generate_ensemble(marg, InferenceConfig(alpha=alpha, ensemble_size=5))
    degree = np.mean([np.count_nonzero(e.network.a[big]) for e in ens])
    edges = np.mean([np.count_nonzero(e.network.a) for e in ens])
    print(f"alpha={alpha}: {banks[big].name} lends to {degree:.1f} banks on average, {edges:.0f} edges in total")

# %% [markdown]
# The liability side of the bank table does not sum to the asset side, so
# liabilities are rescaled; the factor is recorded with every network.

# %%
print("liability scale", ens[0].liability_scale)

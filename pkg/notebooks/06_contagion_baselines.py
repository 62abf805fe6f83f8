# %% [markdown]
# # Two older contagion models
#
# The Furfine cascade passes stress on only when a bank is wiped out.
# DebtRank passes it on proportionally to the capital lost. On two banks
# with leverage k1 and k2 (exposure times LGD over capital) DebtRank is a
# geometric series that blows up once both exceed one.

# %%
import numpy as np

from pdmodel.baselines import furfine_cascade, gen_debtrank
from pdmodel.model import BankNode, ExposureNetwork

banks = [BankNode(0, "one", 100.0, 5.0, 0.01, 0.6), BankNode(1, "two", 80.0, 4.0, 0.01, 0.5)]


def network(k1, k2):
    # k1 = a12 LGD2 / E1 and k2 = a21 LGD1 / E2
    return ExposureNetwork(np.array([[0.0, k1 * 5.0 / 0.5], [k2 * 4.0 / 0.6, 0.0]]))


for k1, k2 in [(0.5, 0.5), (0.9, 0.9), (1.05, 1.05)]:
    r = gen_debtrank(banks, network(k1, k2), [0.01, 0.0])
    print(f"k1={k1} k2={k2}: h = {r.h.round(4)}, loss {r.loss:.3f}, spectral radius {r.spectral_radius:.2f}, "
          f"{r.iterations} iterations")

# %% [markdown]
# Furfine needs a shock bigger than the capital before anything moves.

# %%
for shock in (4.0, 5.0, 6.0):
    r = furfine_cascade(banks, network(1.05, 1.05), [shock, 0.0])
    print(shock, r.defaulted, r.loss)

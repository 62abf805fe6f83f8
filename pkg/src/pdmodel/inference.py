"""Reconstruct bilateral exposures from each bank's aggregate interbank assets and liabilities.

Borrowers, smallest total liabilities first, repeatedly take a loan of a
fixed fraction of their total liabilities from a lender drawn with
probability proportional to ``residual_assets ** alpha``. Loans are capped
by the lender's residual assets and the borrower's residual liabilities.
When the only node left with residual assets is the borrower itself,
earlier loans are re-routed through the borrower so the diagonal stays
empty and every marginal is preserved.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import DomainError
from .model import ExposureNetwork


class InferenceError(RuntimeError):
    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed


@dataclass(frozen=True)
class AggregateMarginals:
    """``assets[i] = sum_j a_ij`` (lent out), ``liabilities[j] = sum_i a_ij`` (borrowed)."""

    assets: np.ndarray
    liabilities: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.assets, dtype=float)
        l = np.asarray(self.liabilities, dtype=float)
        if a.shape != l.shape or a.ndim != 1:
            raise DomainError("assets and liabilities must be equal-length vectors")
        if np.any(a < 0) or np.any(l < 0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(l))):
            raise DomainError("marginals must be finite and nonnegative")
        object.__setattr__(self, "assets", a)
        object.__setattr__(self, "liabilities", l)

    def normalized(self):
        """Rescale liabilities so both sides have the same total."""
        ta, tl = self.assets.sum(), self.liabilities.sum()
        if ta == 0 or tl == 0:
            raise DomainError("marginals must have positive totals")
        if ta == tl:
            return self
        f = ta / tl
        return AggregateMarginals(self.assets, self.liabilities * f, scale=self.scale * f)


@dataclass(frozen=True)
class InferenceConfig:
    alpha: float = 1.0
    min_loan_fraction: float = 0.05
    ensemble_size: int = 10
    seed: int = 0
    max_reroutes: int = 10_000

    def __post_init__(self):
        if self.alpha < 0:
            raise DomainError("alpha must be >= 0")
        if not 0 < self.min_loan_fraction <= 1:
            raise DomainError("min_loan_fraction must lie in (0, 1]")
        if self.ensemble_size < 1:
            raise DomainError("ensemble_size must be >= 1")


@dataclass
class InferredNetwork:
    network: ExposureNetwork
    seed: int
    liability_scale: float
    reroutes: int
    loans: int = field(default=0)


def _reroute(a, j, need, rng, budget):
    """Divert ``need`` through node ``j`` using earlier loans i -> k with i, k != j.

    Loan i -> k of size x becomes i -> j and j -> k for the diverted part,
    which leaves i's assets and k's liabilities unchanged while using ``x``
    of j's residual assets and filling ``x`` of its residual liabilities.
    """
    n = a.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[j] = False
    used = 0
    while need > 0:
        sub = a[np.ix_(mask, mask)]
        cand = np.argwhere(sub > 0)
        if len(cand) == 0 or used >= budget:
            raise InferenceError("cannot re-route loans to keep the diagonal empty")
        others = np.flatnonzero(mask)
        i, k = others[cand[rng.integers(len(cand))]]
        x = min(a[i, k], need)
        a[i, k] -= x
        a[i, j] += x
        a[j, k] += x
        need -= x
        used += 1
    return used


def infer_network(marginals: AggregateMarginals, config: InferenceConfig, rng=None):
    """Build one exposure matrix matching the (normalized) marginals."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    m = marginals.normalized()
    n = len(m.assets)
    total = m.assets.sum()
    eps = 1e-13 * total
    a = np.zeros((n, n))
    res_a = m.assets.copy()
    res_l = m.liabilities.copy()
    res_a[res_a < eps] = 0.0
    res_l[res_l < eps] = 0.0
    loans = 0
    reroutes = 0
    order = np.lexsort((np.arange(n), m.liabilities))
    for j in order:
        unit = config.min_loan_fraction * m.liabilities[j]
        while res_l[j] > 0:
            ok = res_a > 0
            ok[j] = False
            if not ok.any():
                need = min(res_l[j], res_a[j])
                if need <= eps:
                    res_l[j] = 0.0
                    break
                reroutes += _reroute(a, j, need, rng, config.max_reroutes - reroutes)
                res_a[j] -= need
                res_l[j] -= need
                res_a[j] = 0.0 if res_a[j] < eps else res_a[j]
                res_l[j] = 0.0 if res_l[j] < eps else res_l[j]
                continue
            cands = np.flatnonzero(ok)
            w = res_a[cands] ** config.alpha
            i = cands[rng.choice(len(cands), p=w / w.sum())]
            x = min(unit, res_a[i], res_l[j])
            a[i, j] += x
            loans += 1
            # assign exact zeros when a side is exhausted
            res_a[i] = 0.0 if res_a[i] - x < eps else res_a[i] - x
            res_l[j] = 0.0 if res_l[j] - x < eps else res_l[j] - x
    return InferredNetwork(ExposureNetwork(a), config.seed, m.scale, reroutes, loans)


def generate_ensemble(marginals: AggregateMarginals, config: InferenceConfig):
    """``ensemble_size`` networks, member ``k`` built from sub-seed ``k`` of the config seed."""
    seeds = np.random.SeedSequence(config.seed).spawn(config.ensemble_size)
    out = []
    for k, ss in enumerate(seeds):
        try:
            out.append(infer_network(marginals, config, rng=np.random.default_rng(ss)))
        except InferenceError as exc:
            raise InferenceError(f"ensemble member {k}: {exc}", seed=(config.seed, k)) from exc
        out[-1].seed = k
    return out

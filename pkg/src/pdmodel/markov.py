"""Exact four-state Markov chain for two symmetric banks.

States are ordered ``(0, 1, 2, 12)``: nobody defaulted, only bank 1, only
bank 2, both. Bank 2 surviving in state ``1`` carries the impact
``a_hat = a * LGD`` from bank 1's default and its PD is re-evaluated with the
Merton update; state ``12`` is absorbing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import DomainError, bivariate_norm_cdf, merton_sigma, norm_cdf, norm_inv
from .model import PD_FLOOR

STATES = ("0", "1", "2", "12")
FLAT_TOL = 1e-14


@dataclass(frozen=True)
class TwoNodeParams:
    asset: float
    capital: float
    pd: float
    lgd: float
    a_hat: float
    rho: float

    def __post_init__(self):
        if not 0 < self.capital < self.asset:
            raise DomainError("need 0 < capital < asset")
        if not 0 < self.pd < 1:
            raise DomainError("need 0 < pd < 1")
        if not 0 <= self.lgd <= 1:
            raise DomainError("need 0 <= lgd <= 1")
        if self.a_hat < 0:
            raise DomainError("a_hat must be nonnegative")
        if self.a_hat >= self.asset:
            raise DomainError("a_hat >= asset leaves a negative post-impact asset")
        if not -1 <= self.rho <= 1:
            raise DomainError("rho must lie in [-1, 1]")

    @property
    def sigma(self):
        return merton_sigma(self.asset, self.capital, self.pd)

    @property
    def exposure(self):
        """Gross exposure a = a_hat / LGD."""
        return self.a_hat / self.lgd if self.lgd > 0 else 0.0


def contagion_pd(p: TwoNodeParams):
    """PD of the survivor after its counterparty defaulted."""
    if p.a_hat >= p.capital:
        return 1.0
    if p.a_hat == 0:
        return p.pd
    s = p.sigma
    d = (np.log((p.asset - p.a_hat) / (p.asset - p.capital)) - 0.5 * s * s) / s
    return max(PD_FLOOR, 1.0 - norm_cdf(d))


def transition_matrix(p: TwoNodeParams):
    """Row-stochastic 4x4 matrix over states (0, 1, 2, 12)."""
    q = norm_inv(p.pd)
    both = bivariate_norm_cdf(q, q, p.rho)
    single = p.pd - both
    c = contagion_pd(p)
    T = np.array([
        [1.0 - 2.0 * single - both, single, single, both],
        [0.0, 1.0 - c, 0.0, c],
        [0.0, 0.0, 1.0 - c, c],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return T


def evolve(p: TwoNodeParams, M):
    """State probabilities at t = 0..M, shape ``(M + 1, 4)``."""
    if M < 0:
        raise DomainError("M must be >= 0")
    T = transition_matrix(p)
    out = np.zeros((M + 1, 4))
    out[0, 0] = 1.0
    for t in range(M):
        out[t + 1] = out[t] @ T
    return out


def state_losses(p: TwoNodeParams):
    L = p.asset * p.lgd
    return np.array([0.0, L, L, 2.0 * L])


def state_loss_distribution(p: TwoNodeParams, M):
    """Exact loss distribution after ``M`` periods, discounting neglected.

    Returns ``(values, probabilities, mean)`` with states 1 and 2 merged
    into the single loss value ``A * LGD``.
    """
    pi = evolve(p, M)[-1]
    L = state_losses(p)
    values = np.array([0.0, L[1], L[3]])
    probs = np.array([pi[0], pi[1] + pi[2], pi[3]])
    return values, probs, float(L @ pi)


def exact_quantile(values, probs, q):
    """Smallest loss whose cumulative probability reaches ``q``."""
    order = np.argsort(values)
    cdf = np.cumsum(np.asarray(probs)[order])
    i = int(np.searchsorted(cdf, q - 1e-15))
    return float(np.asarray(values)[order][min(i, len(values) - 1)])


def classify(series, tol=FLAT_TOL):
    diffs = np.diff(np.asarray(series, dtype=float))
    up = np.any(diffs > tol)
    down = np.any(diffs < -tol)
    if up and down:
        return "non-monotone"
    if down:
        return "decreasing"
    if up:
        return "increasing"
    return "flat"


@dataclass
class ScanResult:
    capitals: np.ndarray
    rhos: np.ndarray
    pi12: np.ndarray  # (len(capitals), len(rhos))
    classes: list
    crossovers: list  # (E_low, E_high) pairs where the class flips

    @property
    def single_crossover(self):
        return len(self.crossovers) == 1


def strong_contagion_scan(base: TwoNodeParams, capitals, rhos, M=7):
    """Classify pi_12(M) as a function of rho for every capital in ``capitals``."""
    capitals = np.asarray(capitals, dtype=float)
    rhos = np.asarray(rhos, dtype=float)
    if capitals.size == 0 or rhos.size == 0:
        raise DomainError("capital and rho grids must be nonempty")
    if np.any(np.diff(rhos) <= 0):
        raise DomainError("rho grid must be strictly increasing")
    pi12 = np.empty((capitals.size, rhos.size))
    for i, E in enumerate(capitals):
        for j, r in enumerate(rhos):
            p = TwoNodeParams(base.asset, E, base.pd, base.lgd, base.a_hat, r)
            pi12[i, j] = evolve(p, M)[-1, 3]
    classes = [classify(row) for row in pi12]
    order = np.argsort(capitals)
    crossovers = []
    for a, b in zip(order[:-1], order[1:]):
        if classes[a] != classes[b]:
            crossovers.append((float(capitals[a]), float(capitals[b])))
    return ScanResult(capitals, rhos, pi12, classes, crossovers)

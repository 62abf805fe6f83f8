"""Network-theory comparison models: Furfine domino cascade and generalized DebtRank."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import DomainError


def _arrays(banks):
    A = np.array([b.total_asset for b in banks], dtype=float)
    E = np.array([b.capital for b in banks], dtype=float)
    lgd = np.array([b.lgd for b in banks], dtype=float)
    return A, E, lgd


@dataclass
class CascadeResult:
    defaulted: np.ndarray
    rounds: int
    loss: float
    received: np.ndarray


def furfine_cascade(banks, net, shocks):
    """Domino cascade: a bank fails once cumulative losses exceed its capital.

    A failing bank ``j`` passes ``a[i, j] * LGD_j`` to each creditor ``i``
    exactly once. Loss is the sum of ``A_i * LGD_i`` over failed banks.
    """
    A, E, lgd = _arrays(banks)
    shocks = np.asarray(shocks, dtype=float)
    if shocks.shape != A.shape or np.any(shocks < 0):
        raise DomainError("shocks must be a nonnegative vector, one entry per bank")
    defaulted = np.zeros(len(A), dtype=bool)
    received = shocks.copy()
    rounds = 0
    while True:
        new = ~defaulted & (received > E)
        if not new.any():
            break
        rounds += 1
        defaulted |= new
        received = received + net.a @ (new * lgd)
    loss = float(np.sum(A * lgd * defaulted))
    return CascadeResult(defaulted, rounds, loss, received)


@dataclass
class DebtRankResult:
    h: np.ndarray
    iterations: int
    converged: bool
    loss: float
    spectral_radius: float
    history: np.ndarray


def gen_debtrank(banks, net, initial_stress, tol=1e-10, max_iter=100_000):
    """Generalized DebtRank iteration.

    h_i(t+1) = min(1, h_i(t) + sum_j (a_ij LGD_j / E_i) (h_j(t) - h_j(t-1)))

    starting from ``h(0) = initial_stress`` and ``h(-1) = 0``. Loss is the
    capital written off, ``sum_i h_i E_i``. Hitting ``max_iter`` is reported
    through ``converged=False`` rather than raised.
    """
    A, E, lgd = _arrays(banks)
    h = np.asarray(initial_stress, dtype=float).copy()
    if h.shape != E.shape or np.any((h < 0) | (h > 1)):
        raise DomainError("initial stress must be one fraction in [0, 1] per bank")
    if not tol > 0:
        raise DomainError("tol must be positive")
    lev = net.a * lgd[None, :] / E[:, None]
    prev = np.zeros_like(h)
    history = [h.copy()]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        nxt = np.minimum(1.0, h + lev @ (h - prev))
        step = np.max(np.abs(nxt - h), initial=0.0)
        prev, h = h, nxt
        history.append(h.copy())
        if step < tol:
            converged = True
            break
    radius = float(np.max(np.abs(np.linalg.eigvals(lev)), initial=0.0))
    return DebtRankResult(h, it, converged, float(h @ E), radius, np.array(history))

"""Banks, exposure network, per-period system state and the impact step."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .kernel import DomainError, norm_cdf

PD_FLOOR = 1e-6

MERTON = "merton"
LINEAR = "linear"
RULES = (MERTON, LINEAR)


@dataclass(frozen=True)
class BankNode:
    """Static data of one institution. Currency is bn EUR."""

    id: int
    name: str
    total_asset: float
    capital: float
    pd0: float
    lgd: float = 0.6

    def __post_init__(self):
        if not self.total_asset > 0:
            raise DomainError(f"{self.name}: total asset must be positive")
        if not 0 < self.capital < self.total_asset:
            raise DomainError(f"{self.name}: capital must lie in (0, total asset)")
        if not 0 <= self.pd0 < 1:
            raise DomainError(f"{self.name}: pd0 must lie in [0, 1)")
        if not 0 <= self.lgd <= 1:
            raise DomainError(f"{self.name}: lgd must lie in [0, 1]")

    @property
    def liability(self):
        return self.total_asset - self.capital


@dataclass(frozen=True)
class ExposureNetwork:
    """Exposure matrix ``a[i, j]``: what bank ``i`` has lent to / is exposed to bank ``j``."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError("exposure matrix must be square")
        if np.any(np.diag(a) != 0):
            raise DomainError("exposure matrix must have zero diagonal")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise DomainError("exposures must be finite and nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self):
        return self.a.shape[0]

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, n)))

    def interbank_assets(self):
        return self.a.sum(axis=1)

    def interbank_liabilities(self):
        return self.a.sum(axis=0)

    def leverage_matrix(self, banks: Sequence[BankNode]):
        lgd = np.array([b.lgd for b in banks])
        cap = np.array([b.capital for b in banks])
        return self.a * lgd[None, :] / cap[:, None]


@dataclass(frozen=True)
class DiscountCurve:
    rate: float = 0.0

    def __post_init__(self):
        if self.rate <= -1.0:
            raise DomainError("discount rate must exceed -100%")

    def factor(self, t):
        """D(t) = (1 + r)^-t, t in years."""
        return (1.0 + self.rate) ** (-np.asarray(t, dtype=float))


@dataclass
class SystemState:
    """Evolving state of the network on one path.

    ``pd`` for alive nodes is kept in ``[PD_FLOOR, 1]``; immune nodes hold 0.
    ``A - E`` is constant per node because both move by the same impact.
    """

    t: int
    alive: np.ndarray
    capital: np.ndarray
    asset: np.ndarray
    pd: np.ndarray
    defaulted_this_period: np.ndarray = field(default=None)
    immune: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.alive)
        if self.defaulted_this_period is None:
            self.defaulted_this_period = np.zeros(n, dtype=bool)
        if self.immune is None:
            self.immune = np.zeros(n, dtype=bool)

    @classmethod
    def initial(cls, banks: Sequence[BankNode], pd0=None, immune=None):
        pd = np.array([b.pd0 for b in banks], dtype=float) if pd0 is None else np.array(pd0, dtype=float)
        immune = np.zeros(len(banks), dtype=bool) if immune is None else np.asarray(immune, dtype=bool)
        pd = np.where(immune, 0.0, np.clip(pd, PD_FLOOR, 1.0))
        return cls(
            t=0,
            alive=np.ones(len(banks), dtype=bool),
            capital=np.array([b.capital for b in banks], dtype=float),
            asset=np.array([b.total_asset for b in banks], dtype=float),
            pd=pd,
            immune=immune,
        )

    def copy(self):
        return replace(
            self,
            alive=self.alive.copy(),
            capital=self.capital.copy(),
            asset=self.asset.copy(),
            pd=self.pd.copy(),
            defaulted_this_period=self.defaulted_this_period.copy(),
            immune=self.immune.copy(),
        )


def impact(state: SystemState, net: ExposureNetwork, banks: Sequence[BankNode]):
    """I_i = sum_j a_ij * LGD_j over nodes j defaulting in the current period.

    Returned for every node; entries for nodes that are not alive are zero.
    """
    lgd = np.array([b.lgd for b in banks])
    hit = state.defaulted_this_period & state.alive
    out = net.a @ (hit * lgd)
    out[~state.alive | state.defaulted_this_period] = 0.0
    return out


def linear_update(pd, imp, capital):
    """PD_i(t+dt) = min(1, PD + (1 - PD) I / E), capped at 1 once I >= E."""
    pd = np.asarray(pd, dtype=float)
    imp = np.asarray(imp, dtype=float)
    capital = np.asarray(capital, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.minimum(1.0, pd + (1.0 - pd) * imp / capital)
    out = np.where(imp >= capital, 1.0, out)
    return float(out) if out.ndim == 0 else out


def merton_update(asset, imp, liability, sigma, capital=None, dt=1.0):
    """Merton PD of a bank whose assets drop from ``asset`` to ``asset - imp``.

    Zero drift, liability and volatility held at their t=0 values. Returns 1
    when the impact wipes out the capital ``asset - liability`` (or the
    explicit ``capital`` when given).
    """
    asset = np.asarray(asset, dtype=float)
    imp = np.asarray(imp, dtype=float)
    liability = np.asarray(liability, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    capital = asset - liability if capital is None else np.asarray(capital, dtype=float)
    wiped = imp >= capital
    remaining = np.where(wiped, liability, asset - imp)
    s = sigma * np.sqrt(dt)
    d = (np.log(remaining) - np.log(liability) - 0.5 * s * s) / s
    out = np.where(wiped, 1.0, 1.0 - norm_cdf(d))
    return float(out) if out.ndim == 0 else out


def apply_impact(state: SystemState, impacts, rule, banks: Sequence[BankNode], sigma=None, dt=1.0):
    """Advance a single-path state by one period.

    Capital and asset of surviving nodes drop by the impact, the PD moves
    by the chosen rule and nodes defaulting this period are removed.
    Nodes with zero impact keep their PD untouched.
    """
    if rule not in RULES:
        raise DomainError(f"unknown update rule {rule!r}")
    new = state.copy()
    survivors = state.alive & ~state.defaulted_this_period
    imp = np.where(survivors, impacts, 0.0)
    hit = imp > 0
    if rule == LINEAR:
        pd_new = linear_update(state.pd, imp, state.capital)
    else:
        liability = np.array([b.liability for b in banks])
        pd_new = merton_update(state.asset, imp, liability, sigma, capital=state.capital, dt=dt)
    pd_new = np.clip(pd_new, PD_FLOOR, 1.0)
    upd = hit & ~state.immune
    new.pd = np.where(upd, pd_new, state.pd)
    new.capital = state.capital - imp
    new.asset = state.asset - imp
    new.alive = survivors
    new.defaulted_this_period = np.zeros_like(state.alive)
    new.t = state.t + 1
    return new

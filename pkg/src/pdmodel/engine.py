"""Multi-period correlated-default Monte Carlo with contagion on the exposure network.

Paths are simulated in fixed-size blocks of vectorised numpy arrays. Every
path owns a contiguous slice of a Philox stream keyed by the seed, so the
draws of path ``p`` depend only on ``(seed, p)``; the period-``t`` sub-stream
is a fixed offset inside that slice. Results therefore do not depend on the
block size actually scheduled or on the number of worker threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .kernel import (
    DomainError,
    cholesky_lower,
    merton_sigma,
    norm_inv,
    uniform_cholesky,
    validate_correlation,
)
from .model import (
    LINEAR,
    MERTON,
    PD_FLOOR,
    RULES,
    BankNode,
    DiscountCurve,
    ExposureNetwork,
    SystemState,
    linear_update,
    merton_update,
)

BLOCK = 8192
_U53 = 2.0 ** -53


@dataclass(frozen=True)
class SimulationConfig:
    periods: int = 7
    dt: float = 1.0
    rho: object = 0.5
    discount_rate: float = 0.0
    rule: str = MERTON
    n_paths: int = 100_000
    seed: int = 0
    threads: int = 1
    keep_period_losses: bool = False

    def __post_init__(self):
        if int(self.periods) < 1:
            raise DomainError("periods must be >= 1")
        if int(self.n_paths) < 1:
            raise DomainError("n_paths must be >= 1")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.rule not in RULES:
            raise DomainError(f"rule must be one of {RULES}, got {self.rule!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if np.ndim(self.rho) == 0 and not -1.0 <= float(self.rho) <= 1.0:
            raise DomainError("rho must lie in [-1, 1]")
        DiscountCurve(self.discount_rate)

    @property
    def discount(self):
        return DiscountCurve(self.discount_rate)

    def correlation_factor(self, n):
        if np.ndim(self.rho) == 0:
            return uniform_cholesky(n, float(self.rho))
        corr = validate_correlation(self.rho)
        if corr.shape[0] != n:
            raise DomainError(f"correlation matrix is {corr.shape[0]}x{corr.shape[0]}, network has {n} nodes")
        return cholesky_lower(corr)


@dataclass
class LossDistribution:
    """Per-path discounted total losses.

    ``default_time[p, k]`` is the period in which node ``k`` defaulted on
    path ``p`` (0 if it survived all periods).
    """

    total: np.ndarray
    default_time: np.ndarray
    max_loss: float
    period_losses: np.ndarray = field(default=None)

    @property
    def n_paths(self):
        return len(self.total)

    def mean(self):
        return float(np.mean(self.total))

    def stderr(self):
        if self.n_paths < 2:
            return float("nan")
        return float(np.std(self.total, ddof=1) / np.sqrt(self.n_paths))

    def quantile(self, q):
        return np.quantile(self.total, q, method="inverted_cdf")


@dataclass(frozen=True)
class _Setup:
    a: np.ndarray
    lgd: np.ndarray
    asset: np.ndarray
    capital: np.ndarray
    liability: np.ndarray
    pd0: np.ndarray
    immune: np.ndarray
    sigma: np.ndarray
    factor: np.ndarray
    discount: np.ndarray
    rule: str
    periods: int
    dt: float
    seed: int
    stride: int


def path_normals(seed, start, count, periods, n):
    """Standard normal draws for paths ``start .. start+count-1``.

    Shape ``(count, periods, n)``. Each path reads ``stride`` consecutive
    64-bit words of the Philox stream keyed by ``seed``, beginning at word
    ``path * stride``; ``stride`` is ``periods * n`` rounded up to the Philox
    block size of 4 so every path starts on its own counter value.
    """
    stride = -(-periods * n // 4) * 4
    bitgen = np.random.Philox(key=int(seed), counter=start * stride // 4)
    raw = bitgen.random_raw(count * stride).reshape(count, stride)[:, : periods * n]
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * _U53
    return ndtri(u).reshape(count, periods, n)


def sample_defaults(state: SystemState, factor, draw):
    """Default flags for one period of one path.

    ``factor`` is the Cholesky factor of the correlation among alive nodes
    and ``draw`` holds one independent standard normal per alive node.
    """
    idx = np.flatnonzero(state.alive)
    x = np.asarray(factor) @ np.asarray(draw)
    flags = np.zeros(len(state.alive), dtype=bool)
    flags[idx] = x < _thresholds(state.pd[idx])
    return flags


def _thresholds(pd):
    thr = np.full(pd.shape, -np.inf)
    sure = pd >= 1.0
    mid = (pd > 0.0) & ~sure
    thr[sure] = np.inf
    thr[mid] = norm_inv(pd[mid])
    return thr


def _prepare(banks: Sequence[BankNode], net: ExposureNetwork, config: SimulationConfig, pd0=None, immune=None):
    n = len(banks)
    if net.n != n:
        raise DomainError(f"network has {net.n} nodes but {n} banks were given")
    asset = np.array([b.total_asset for b in banks], dtype=float)
    capital = np.array([b.capital for b in banks], dtype=float)
    lgd = np.array([b.lgd for b in banks], dtype=float)
    pd = np.array([b.pd0 for b in banks], dtype=float) if pd0 is None else np.asarray(pd0, dtype=float)
    if pd.shape != (n,) or np.any(~(pd >= 0.0) | ~(pd <= 1.0)):
        raise DomainError("initial default probabilities must lie in [0, 1]")
    immune = np.zeros(n, dtype=bool) if immune is None else np.asarray(immune, dtype=bool)
    pd = np.where(immune, 0.0, np.clip(pd, PD_FLOOR, 1.0))
    sigma = np.ones(n)
    if config.rule == MERTON:
        # volatility is calibrated to the scenario's own starting PD
        cal = np.clip(pd, PD_FLOOR, 1.0 - 1e-12)
        sigma = np.array([merton_sigma(A, E, p, config.dt) for A, E, p in zip(asset, capital, cal)])
    periods = int(config.periods)
    return _Setup(
        a=net.a,
        lgd=lgd,
        asset=asset,
        capital=capital,
        liability=asset - capital,
        pd0=pd,
        immune=immune,
        sigma=sigma,
        factor=config.correlation_factor(n),
        discount=config.discount.factor(np.arange(1, periods + 1) * config.dt),
        rule=config.rule,
        periods=periods,
        dt=float(config.dt),
        seed=int(config.seed),
        stride=-(-periods * n // 4) * 4,
    )


def correlated_draws(seed, factor, start, count, periods):
    """Latent variables ``x = L z`` for a block of paths, shape ``(count, periods, n)``."""
    z = path_normals(seed, start, count, periods, factor.shape[0])
    # row-wise product; einsum keeps each path's result independent of the block
    return np.einsum("ptk,nk->ptn", z, factor)


def _evolve(s: _Setup, x, keep_period_losses, keep_defaults):
    count, _, n = x.shape
    alive = np.ones((count, n), dtype=bool)
    asset = np.broadcast_to(s.asset, (count, n)).copy()
    capital = np.broadcast_to(s.capital, (count, n)).copy()
    pd = np.broadcast_to(s.pd0, (count, n)).copy()
    thr = np.broadcast_to(_thresholds(s.pd0), (count, n)).copy()
    total = np.zeros(count)
    dtime = np.zeros((count, n), dtype=np.int16) if keep_defaults else None
    plosses = np.zeros((count, s.periods)) if keep_period_losses else None
    for t in range(s.periods):
        dflt = alive & (x[:, t, :] < thr)
        if not dflt.any():
            continue
        loss = np.einsum("pn,n->p", asset * dflt, s.lgd)
        total += loss * s.discount[t]
        if plosses is not None:
            plosses[:, t] = loss
        if dtime is not None:
            dtime[dflt] = t + 1
        alive &= ~dflt
        rows = np.flatnonzero(dflt.any(axis=1))
        imp = np.zeros((count, n))
        imp[rows] = np.einsum("pn,kn->pk", dflt[rows] * s.lgd, s.a)
        hit = alive & (imp > 0) & ~s.immune
        if hit.any():
            r, c = np.nonzero(hit)
            I = imp[r, c]
            E = capital[r, c]
            if s.rule == LINEAR:
                new = linear_update(pd[r, c], I, E)
            else:
                new = merton_update(asset[r, c], I, s.liability[c], s.sigma[c], capital=E, dt=s.dt)
            new = np.clip(new, PD_FLOOR, 1.0)
            pd[r, c] = new
            thr[r, c] = _thresholds(new)
        imp[~alive] = 0.0
        capital[rows] -= imp[rows]
        asset[rows] -= imp[rows]
    return total, dtime, plosses


def _blocks(n_paths, block):
    return [(s, min(block, n_paths - s)) for s in range(0, n_paths, block)]


def run_scenarios(banks, net, config: SimulationConfig, scenarios, threads=None, block=BLOCK, keep_defaults=True):
    """Run several starting-PD scenarios on the same random draws.

    ``scenarios`` is a sequence of ``(pd0, immune)`` pairs, either entry
    ``None`` for the banks' own values. Every scenario sees identical
    latent variables path by path (common random numbers).
    """
    setups = [_prepare(banks, net, config, pd0=p, immune=m) for p, m in scenarios]
    if not setups:
        raise DomainError("no scenarios given")
    base = setups[0]
    n_paths = int(config.n_paths)
    threads = threads or config.threads or os.cpu_count() or 1
    keep = config.keep_period_losses

    def job(j):
        start, count = j
        x = correlated_draws(base.seed, base.factor, start, count, base.periods)
        return [_evolve(s, x, keep, keep_defaults) for s in setups]

    jobs = _blocks(n_paths, block)
    if threads == 1 or len(jobs) == 1:
        parts = [job(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, jobs))
    out = []
    for k, s in enumerate(setups):
        pieces = [p[k] for p in parts]
        out.append(LossDistribution(
            total=np.concatenate([p[0] for p in pieces]),
            default_time=np.concatenate([p[1] for p in pieces]) if keep_defaults else None,
            max_loss=float(np.sum(s.asset * s.lgd)),
            period_losses=np.concatenate([p[2] for p in pieces]) if keep else None,
        ))
    return out


def run_simulation(banks, net, config: SimulationConfig, pd0=None, immune=None, threads=None, block=BLOCK):
    """Loss distribution over ``config.n_paths`` independent paths.

    ``pd0`` replaces the banks' starting PDs (1 forces a default in the
    first period) and ``immune`` marks nodes that can never default; both
    leave the random draws untouched, so scenarios run with the same seed
    share common random numbers.
    """
    return run_scenarios(banks, net, config, [(pd0, immune)], threads=threads, block=block)[0]


def run_path(banks, net, config: SimulationConfig, path_index=0, pd0=None, immune=None):
    """Per-period losses and discounted total of a single path."""
    setup = _prepare(banks, net, config, pd0=pd0, immune=immune)
    x = correlated_draws(setup.seed, setup.factor, int(path_index), 1, setup.periods)
    total, _, plosses = _evolve(setup, x, True, False)
    return plosses[0], float(total[0])

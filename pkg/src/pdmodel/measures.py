"""Systemic-risk measures on top of the simulation engine: PDImpact, PDRank, PDBeta.

All differences of Monte Carlo means are taken between runs that share the
same seed and therefore the same latent draws on every path (common random
numbers), which is what makes the small differences measurable at 1e5
paths.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import SimulationConfig, run_scenarios
from .kernel import DomainError
from .model import PD_FLOOR

NONE = "none"
FORCE_DEFAULT = "force-default"
IMMUNE = "immune"
MODES = (NONE, FORCE_DEFAULT, IMMUNE)


@dataclass
class ScenarioOverride:
    """Per-node modifications of the starting PDs.

    ``force-default`` sets the node's PD to 1 at t=0, ``immune`` pins it to 0
    for the whole run; ``delta_pd`` is added before the modes apply and the
    result is clipped to ``[PD_FLOOR, 1]``.
    """

    modes: list = field(default_factory=list)
    delta_pd: np.ndarray = None

    def resolve(self, banks):
        n = len(banks)
        modes = list(self.modes) or [NONE] * n
        if len(modes) != n or any(m not in MODES for m in modes):
            raise DomainError(f"modes must be one of {MODES} per node")
        pd = np.array([b.pd0 for b in banks], dtype=float)
        if self.delta_pd is not None:
            shifted = pd + np.asarray(self.delta_pd, dtype=float)
            if np.any(shifted < 0) or np.any(shifted > 1):
                raise DomainError("shifted default probabilities leave [0, 1]")
            pd = np.clip(shifted, PD_FLOOR, 1.0)
        immune = np.array([m == IMMUNE for m in modes])
        pd = np.where(np.array([m == FORCE_DEFAULT for m in modes]), 1.0, pd)
        pd = np.where(immune, 0.0, pd)
        return pd, immune


def _means(banks, net, config, overrides, threads=None):
    dists = run_scenarios(
        banks, net, config, [o.resolve(banks) for o in overrides], threads=threads, keep_defaults=False
    )
    return [d.mean() for d in dists], dists


def pd_impact(banks, net, config: SimulationConfig, delta_pd, threads=None):
    """Mean-loss change when the starting PDs move by ``delta_pd``."""
    (stressed, base), _ = _means(
        banks, net, config, [ScenarioOverride(delta_pd=delta_pd), ScenarioOverride()], threads
    )
    return stressed - base


@dataclass
class RankResult:
    pd_rank: np.ndarray
    loss_forced: np.ndarray
    loss_immune: np.ndarray
    names: list
    common_random_numbers: bool = True

    def order(self):
        """Node indices by decreasing PDRank (ties by index)."""
        return np.lexsort((np.arange(len(self.pd_rank)), -self.pd_rank))

    def table(self):
        return [(self.names[i], float(self.pd_rank[i])) for i in self.order()]


def pd_rank(banks, net, config: SimulationConfig, nodes=None, threads=None):
    """PDRank of each node in ``nodes`` (default all).

    PD_i times the gap between the mean loss with node ``i`` forced to
    default at t=1 and the mean loss with node ``i`` immune.
    """
    n = len(banks)
    nodes = range(n) if nodes is None else [int(i) for i in nodes]
    overrides = []
    for i in nodes:
        for mode in (FORCE_DEFAULT, IMMUNE):
            modes = [NONE] * n
            modes[i] = mode
            overrides.append(ScenarioOverride(modes=modes))
    means, _ = _means(banks, net, config, overrides, threads)
    forced = np.array(means[0::2])
    immune = np.array(means[1::2])
    pd = np.array([banks[i].pd0 for i in nodes])
    return RankResult(pd * (forced - immune), forced, immune, [banks[i].name for i in nodes])


@dataclass
class BetaResult:
    beta: float
    x: np.ndarray
    impact: np.ndarray
    residual: float
    r_squared: float


def pd_beta(banks, net, config: SimulationConfig, x_grid=tuple(range(10, 101, 10)), threads=None):
    """Zero-intercept least-squares slope of PDImpact against the uniform percentage PD increase.

    Every point of the curve is computed on the same random draws as the
    unstressed baseline. ``r_squared`` is the usual centred coefficient of
    determination of the zero-intercept fit.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.size == 0 or not np.any(x != 0):
        raise DomainError("x grid needs at least one nonzero percentage")
    pd = np.array([b.pd0 for b in banks])
    overrides = [ScenarioOverride()] + [ScenarioOverride(delta_pd=pd * xi / 100.0) for xi in x]
    means, _ = _means(banks, net, config, overrides, threads)
    impact = np.array(means[1:]) - means[0]
    beta = float(x @ impact / (x @ x))
    resid = impact - beta * x
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((impact - impact.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return BetaResult(beta, x, impact, float(np.sqrt(ss_res / x.size)), r2)


def log_bins(max_loss, bins=50, floor_fraction=1e-4):
    """``bins`` log-spaced edges over ``(floor_fraction * max_loss, max_loss]``."""
    return np.geomspace(floor_fraction * max_loss, max_loss, bins + 1)


@dataclass
class Summary:
    n_paths: int
    mean: float
    stderr: float
    quantiles: dict
    bin_edges: np.ndarray
    counts: np.ndarray
    zero_count: int
    below_range: int

    def as_dict(self):
        return {
            "n_paths": self.n_paths,
            "mean": self.mean,
            "stderr": self.stderr,
            "quantiles": {f"{q:g}": v for q, v in self.quantiles.items()},
            "histogram": {
                "bin_edges": self.bin_edges.tolist(),
                "counts": self.counts.tolist(),
                "zero_count": self.zero_count,
                "below_range": self.below_range,
                "zero_count_excluded_from_plot": True,
            },
        }


def summarize(dist, quantiles=(0.5, 0.9, 0.99, 0.999), bins=50, edges=None):
    """Mean, standard error, quantiles and a histogram of the total losses.

    Zero losses are counted separately and never fall in a bin; positive
    losses below the first edge are counted in ``below_range``, so
    ``zero_count + below_range + counts.sum() == n_paths``.
    """
    losses = np.asarray(dist.total if hasattr(dist, "total") else dist, dtype=float)
    if losses.size == 0:
        raise DomainError("cannot summarize an empty distribution")
    max_loss = getattr(dist, "max_loss", None) or float(losses.max()) or 1.0
    if edges is None:
        edges = log_bins(max_loss, bins)
    edges = np.asarray(edges, dtype=float)
    pos = losses[losses > 0]
    counts, _ = np.histogram(pos[pos <= edges[-1]], bins=edges)
    below = int(np.sum(pos < edges[0]))
    above = int(np.sum(pos > edges[-1]))
    counts[-1] += above
    stderr = float(np.std(losses, ddof=1) / np.sqrt(losses.size)) if losses.size > 1 else float("nan")
    qs = {float(q): float(np.quantile(losses, q, method="inverted_cdf")) for q in quantiles}
    return Summary(
        n_paths=int(losses.size),
        mean=float(losses.mean()),
        stderr=stderr,
        quantiles=qs,
        bin_edges=edges,
        counts=counts,
        zero_count=int(losses.size - pos.size),
        below_range=below,
    )

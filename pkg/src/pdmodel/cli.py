"""Command-line entry points: simulate, rank, impact, beta, oracle, infer, baseline.

Settings come from an INI file (``--config``) whose sections and keys are
listed in ``DEFAULTS``; the common flags override the file. Every report
echoes the resolved settings (minus the thread count, which never changes
results) together with their SHA-256 hash and the schema version.
"""
from __future__ import annotations

import argparse
import configparser
import copy
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import furfine_cascade, gen_debtrank
from .engine import SimulationConfig, run_scenarios
from .inference import InferenceConfig, InferenceError, generate_ensemble
from .io import (
    SCHEMA_VERSION,
    LoadError,
    bundled,
    config_hash,
    dump_report,
    load_banks,
    load_network,
    write_csv,
)
from .kernel import CalibrationError, DomainError, FactorizationError
from .markov import TwoNodeParams, classify, evolve, strong_contagion_scan
from .measures import FORCE_DEFAULT, IMMUNE, NONE, ScenarioOverride, pd_beta, pd_rank, summarize
from .model import RULES

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

COMMANDS = ("simulate", "rank", "impact", "beta", "oracle", "infer", "baseline")

DEFAULTS = {
    "data": {
        "banks": "",  # empty: bundled gsib_like.csv
        "rating_map": "",  # empty: bundled rating_map.csv
        "network": "",  # empty: infer from the marginals
        "lgd": "",
        "capital_scale": 1.0,
    },
    "simulation": {
        "periods": 7,
        "dt": 1.0,
        "rho": 0.5,
        "correlation": "",  # optional CSV correlation matrix, overrides rho
        "discount_rate": 0.0,
        "rule": "merton",
        "n_paths": 100_000,
        "seed": 0,
        "threads": 0,  # 0: all cores
        "over_ensemble": False,
    },
    "scenario": {
        "force_default": [],
        "immune": [],
    },
    "inference": {
        "alpha": 1.0,
        "min_loan_fraction": 0.05,
        "ensemble_size": 10,
        "seed": 0,
        "member": 0,
    },
    "oracle": {
        "asset": 200.0,
        "pd": 0.001,
        "lgd": 0.6,
        "a_hat": 1.0,
        "capitals": [1.05, 1.1, 1.2, 1.5, 2.0, 3.0],
        "rhos": "0:0.95:20",
        "periods": 7,
    },
    "baseline": {
        "model": "both",
        "shocks": "",
        "stress": "",
        "tol": 1e-10,
        "max_iter": 100_000,
    },
    "report": {
        "quantiles": [0.5, 0.9, 0.99, 0.999],
        "bins": 50,
        "x_grid": [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0],
        "nodes": [],
    },
}

# name lists are kept as strings, numeric lists as floats
_NAME_LISTS = {("scenario", "force_default"), ("scenario", "immune"), ("report", "nodes")}


class ConfigError(ValueError):
    pass


def _parse_value(section, key, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError
            return low in ("true", "yes", "1", "on")
        if isinstance(default, int):
            return int(raw.replace("_", ""))
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            items = [s.strip() for s in raw.replace(";", ",").split(",") if s.strip()]
            if (section, key) in _NAME_LISTS:
                return items
            return [float(s) for s in items]
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {type(default).__name__}") from None
    return raw


def load_settings(path=None):
    """Defaults overlaid with an INI file. Unknown sections or keys are rejected."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    base = Path(path).resolve().parent
    for section in parser.sections():
        if section not in cfg:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in cfg[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            val = _parse_value(section, key, raw, DEFAULTS[section][key])
            if section == "data" and key in ("banks", "rating_map", "network") and val:
                val = str((base / val).resolve()) if not os.path.isabs(val) else val
            if section == "simulation" and key == "correlation" and val:
                val = str((base / val).resolve()) if not os.path.isabs(val) else val
            cfg[section][key] = val
    return cfg


def apply_flags(cfg, args):
    sim = cfg["simulation"]
    for flag, key in (
        ("seed", "seed"),
        ("paths", "n_paths"),
        ("periods", "periods"),
        ("rho", "rho"),
        ("rule", "rule"),
        ("discount_rate", "discount_rate"),
        ("threads", "threads"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            sim[key] = val
    if getattr(args, "shock", None):
        cfg["baseline"]["shocks"] = ";".join(args.shock)
    if getattr(args, "stress", None):
        cfg["baseline"]["stress"] = ";".join(args.stress)
    return cfg


def _echo(cfg):
    echo = copy.deepcopy(cfg)
    del echo["simulation"]["threads"]
    return echo


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _linspace_or_list(spec):
    if isinstance(spec, list):
        return np.array(spec, dtype=float)
    spec = str(spec).strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {spec!r} must read start:stop:count")
        try:
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise ConfigError(f"grid {spec!r} must read start:stop:count") from None
    try:
        return np.array([float(s) for s in spec.replace(";", ",").split(",") if s.strip()])
    except ValueError:
        raise ConfigError(f"cannot parse grid {spec!r}") from None


def _named_values(spec, banks, what):
    """``name=value; name=value`` (names or indices) to a dense vector."""
    out = np.zeros(len(banks))
    if not spec:
        return out
    index = {b.name: b.id for b in banks}
    for item in str(spec).split(";"):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"{what} entry {item!r} must read name=value")
        name, val = item.rsplit("=", 1)
        try:
            amount = float(val)
        except ValueError:
            raise ConfigError(f"{what} value {val!r} is not a number") from None
        out[_node(name.strip(), index, len(banks))] += amount
    return out


def _node(key, index, n):
    if key in index:
        return index[key]
    if key.isdigit() and int(key) < n:
        return int(key)
    raise ConfigError(f"unknown bank {key!r}")


class Context:
    """Loaded banks, the network in use and its provenance."""

    def __init__(self, cfg, need_network=True):
        data = cfg["data"]
        self.bank_path = data["banks"] or str(bundled("gsib_like.csv"))
        rating = data["rating_map"] or str(bundled("rating_map.csv"))
        lgd = float(data["lgd"]) if str(data["lgd"]).strip() else None
        self.banks, self.marginals = load_banks(
            self.bank_path, rating_map=rating, lgd=lgd, capital_scale=cfg["data"]["capital_scale"]
        )
        self.meta = {"banks_sha256": _file_digest(self.bank_path), "n_banks": len(self.banks)}
        self.ensemble = None
        self.net = None
        if not need_network:
            return
        if data["network"]:
            self.net = load_network(data["network"], self.banks)
            self.meta["network"] = {"source": "file", "sha256": _file_digest(data["network"])}
        else:
            self.ensemble = generate_ensemble(self.marginals, inference_config(cfg))
            member = cfg["inference"]["member"]
            if not 0 <= member < len(self.ensemble):
                raise ConfigError(f"inference member {member} outside the ensemble")
            chosen = self.ensemble[member]
            self.net = chosen.network
            self.meta["network"] = {
                "source": "inferred",
                "member": member,
                "liability_scale": chosen.liability_scale,
                "reroutes": chosen.reroutes,
                "loans": chosen.loans,
            }

    def override(self, cfg):
        modes = [NONE] * len(self.banks)
        index = {b.name: b.id for b in self.banks}
        for name in cfg["scenario"]["force_default"]:
            modes[_node(name, index, len(self.banks))] = FORCE_DEFAULT
        for name in cfg["scenario"]["immune"]:
            modes[_node(name, index, len(self.banks))] = IMMUNE
        return ScenarioOverride(modes=modes)


def inference_config(cfg):
    inf = cfg["inference"]
    return InferenceConfig(
        alpha=inf["alpha"],
        min_loan_fraction=inf["min_loan_fraction"],
        ensemble_size=inf["ensemble_size"],
        seed=inf["seed"],
    )


def simulation_config(cfg):
    sim = cfg["simulation"]
    if sim["rule"] not in RULES:
        raise ConfigError(f"rule must be one of {RULES}")
    rho = sim["rho"]
    if sim["correlation"]:
        try:
            rho = np.loadtxt(sim["correlation"], delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read correlation matrix: {exc}") from None
    threads = sim["threads"] or os.cpu_count() or 1
    return SimulationConfig(
        periods=sim["periods"],
        dt=sim["dt"],
        rho=rho,
        discount_rate=sim["discount_rate"],
        rule=sim["rule"],
        n_paths=sim["n_paths"],
        seed=sim["seed"],
        threads=threads,
    )


# -- commands -----------------------------------------------------------------

def cmd_simulate(cfg):
    ctx = Context(cfg)
    sc = simulation_config(cfg)
    rep = cfg["report"]
    scenario = ctx.override(cfg).resolve(ctx.banks)
    nets = [ctx.net]
    if cfg["simulation"]["over_ensemble"] and ctx.ensemble is not None:
        nets = [m.network for m in ctx.ensemble]
    dists = [run_scenarios(ctx.banks, net, sc, [scenario], keep_defaults=False)[0] for net in nets]
    main = dists[cfg["inference"]["member"]] if len(dists) > 1 else dists[0]
    summary = summarize(main, quantiles=rep["quantiles"], bins=rep["bins"])
    a_glob = float(sum(b.total_asset for b in ctx.banks))
    report = {
        "summary": summary.as_dict(),
        "max_loss": main.max_loss,
        "a_glob": a_glob,
        "mean_over_a_glob": summary.mean / a_glob,
        "data": ctx.meta,
    }
    rows = [("zero", 0.0, 0.0, summary.zero_count), ("below_range", 0.0, float(summary.bin_edges[0]), summary.below_range)]
    rows += [("bin", float(lo), float(hi), int(c)) for lo, hi, c in zip(summary.bin_edges[:-1], summary.bin_edges[1:], summary.counts)]
    header = ["kind", "lower", "upper", "count"]
    if len(dists) > 1:
        counts = np.array([summarize(d, bins=rep["bins"], edges=summary.bin_edges).counts for d in dists])
        means = [d.mean() for d in dists]
        report["ensemble"] = {
            "means": means,
            "relative_spread": (max(means) - min(means)) / float(np.mean(means)),
            "min_counts": counts.min(axis=0).tolist(),
            "max_counts": counts.max(axis=0).tolist(),
        }
        header += ["min_count", "max_count"]
        lo, hi = counts.min(axis=0), counts.max(axis=0)
        rows = [r + ("", "") for r in rows[:2]] + [r + (int(a), int(b)) for r, a, b in zip(rows[2:], lo, hi)]
    return report, {"histogram.csv": (header, rows)}


def cmd_rank(cfg):
    ctx = Context(cfg)
    index = {b.name: b.id for b in ctx.banks}
    nodes = [_node(k, index, len(ctx.banks)) for k in cfg["report"]["nodes"]] or None
    res = pd_rank(ctx.banks, ctx.net, simulation_config(cfg), nodes=nodes)
    ids = list(range(len(ctx.banks))) if nodes is None else nodes
    rows = []
    for k in res.order():
        b = ctx.banks[ids[k]]
        rows.append((b.pd0, b.capital, b.total_asset, b.name, float(res.pd_rank[k])))
    # PDRank against PD * total asset, a plain least-squares line reported without a threshold
    x = np.array([ctx.banks[i].pd0 * ctx.banks[i].total_asset for i in ids])
    y = res.pd_rank
    X = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ np.array([slope, icpt])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    report = {
        "common_random_numbers": True,
        "table": [dict(zip(("PD", "Capital", "Total Asset", "Bank", "PDRank"), r)) for r in rows],
        "loss_forced": dict(zip(res.names, res.loss_forced.tolist())),
        "loss_immune": dict(zip(res.names, res.loss_immune.tolist())),
        "pd_asset_regression": {
            "slope": float(slope),
            "intercept": float(icpt),
            "r_squared": 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else None,
        },
        "data": ctx.meta,
    }
    return report, {"rank.csv": (["PD", "Capital", "Total Asset", "Bank", "PDRank"], rows)}


def _impact_series(cfg):
    ctx = Context(cfg)
    res = pd_beta(ctx.banks, ctx.net, simulation_config(cfg), x_grid=cfg["report"]["x_grid"])
    rows = [(float(x), float(c)) for x, c in zip(res.x, res.impact)]
    return ctx, res, rows


def cmd_impact(cfg):
    ctx, res, rows = _impact_series(cfg)
    report = {"common_random_numbers": True, "series": [{"x": x, "pd_impact": c} for x, c in rows], "data": ctx.meta}
    return report, {"impact.csv": (["x_percent", "pd_impact"], rows)}


def cmd_beta(cfg):
    ctx, res, rows = _impact_series(cfg)
    a_glob = float(sum(b.total_asset for b in ctx.banks))
    report = {
        "common_random_numbers": True,
        "pd_beta": res.beta,
        "pd_beta_over_a_glob": res.beta / a_glob,
        "fit": {"intercept": 0.0, "rms_residual": res.residual, "r_squared": res.r_squared},
        "series": [{"x": x, "pd_impact": c} for x, c in rows],
        "data": ctx.meta,
    }
    return report, {"impact.csv": (["x_percent", "pd_impact"], rows)}


def cmd_oracle(cfg):
    o = cfg["oracle"]
    capitals = np.array(o["capitals"], dtype=float)
    rhos = _linspace_or_list(o["rhos"])
    base = TwoNodeParams(o["asset"], float(capitals.max()), o["pd"], o["lgd"], o["a_hat"], float(rhos[0]))
    scan = strong_contagion_scan(base, capitals, rhos, M=o["periods"])
    one_step = [
        classify([evolve(TwoNodeParams(o["asset"], E, o["pd"], o["lgd"], o["a_hat"], r), 1)[-1, 3] for r in rhos])
        for E in capitals
    ]
    header = ["rho"] + [f"pi12_E={E:g}" for E in capitals]
    rows = [(float(r),) + tuple(float(v) for v in scan.pi12[:, j]) for j, r in enumerate(rhos)]
    report = {
        "periods": o["periods"],
        "classes": dict(zip((f"{E:g}" for E in capitals), scan.classes)),
        "single_step_classes": dict(zip((f"{E:g}" for E in capitals), one_step)),
        "crossovers": [list(c) for c in scan.crossovers],
        "single_crossover": scan.single_crossover,
        "rhos": rhos.tolist(),
        "pi12": scan.pi12.tolist(),
    }
    return report, {"oracle.csv": (header, rows)}


def cmd_infer(cfg):
    ctx = Context(cfg, need_network=False)
    ens = generate_ensemble(ctx.marginals, inference_config(cfg))
    m = ctx.marginals.normalized()
    members = []
    files = {}
    for k, inf in enumerate(ens):
        a = inf.network.a
        members.append({
            "member": k,
            "file": f"network_{k}.csv",
            "liability_scale": inf.liability_scale,
            "reroutes": inf.reroutes,
            "loans": inf.loans,
            "edges": int(np.count_nonzero(a)),
            "max_row_deviation": float(np.max(np.abs(a.sum(axis=1) - m.assets))),
            "max_col_deviation": float(np.max(np.abs(a.sum(axis=0) - m.liabilities))),
        })
        rows = [(ctx.banks[i].name, ctx.banks[j].name, float(a[i, j])) for i, j in zip(*np.nonzero(a))]
        files[f"network_{k}.csv"] = (["from", "to", "amount"], rows)
    return {"members": members, "data": ctx.meta}, files


def cmd_baseline(cfg):
    ctx = Context(cfg)
    bl = cfg["baseline"]
    if bl["model"] not in ("furfine", "debtrank", "both"):
        raise ConfigError("baseline model must be furfine, debtrank or both")
    report = {"data": ctx.meta}
    if bl["model"] in ("furfine", "both"):
        shocks = _named_values(bl["shocks"], ctx.banks, "shock")
        if not shocks.any():
            raise ConfigError("furfine needs a shock spec such as 'BNP Paribas=80'")
        r = furfine_cascade(ctx.banks, ctx.net, shocks)
        report["furfine"] = {
            "defaulted": [b.name for b, d in zip(ctx.banks, r.defaulted) if d],
            "rounds": r.rounds,
            "loss": r.loss,
        }
    if bl["model"] in ("debtrank", "both"):
        stress = _named_values(bl["stress"], ctx.banks, "stress")
        if not stress.any():
            raise ConfigError("debtrank needs a stress spec such as 'BNP Paribas=0.1'")
        r = gen_debtrank(ctx.banks, ctx.net, stress, tol=bl["tol"], max_iter=bl["max_iter"])
        report["debtrank"] = {
            "h": dict(zip((b.name for b in ctx.banks), r.h.tolist())),
            "iterations": r.iterations,
            "converged": r.converged,
            "loss": r.loss,
            "spectral_radius": r.spectral_radius,
        }
    return report, {}


HANDLERS = {
    "simulate": cmd_simulate,
    "rank": cmd_rank,
    "impact": cmd_impact,
    "beta": cmd_beta,
    "oracle": cmd_oracle,
    "infer": cmd_infer,
    "baseline": cmd_baseline,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI settings file")
    common.add_argument("--seed", type=int, help="simulation seed")
    common.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    common.add_argument("--periods", type=int, help="number of periods M")
    common.add_argument("--rho", type=float, help="uniform latent correlation")
    common.add_argument("--rule", choices=RULES, help="PD update rule")
    common.add_argument("--discount-rate", type=float, help="flat annual discount rate")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores); results do not depend on it")
    common.add_argument("--out", help="output directory; the JSON report goes to stdout when omitted")
    parser = argparse.ArgumentParser(prog="pdmodel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=HANDLERS[name].__name__.replace("cmd_", ""))
        if name == "baseline":
            p.add_argument("--shock", action="append", metavar="NAME=AMOUNT", help="Furfine shock in bn EUR")
            p.add_argument("--stress", action="append", metavar="NAME=FRACTION", help="DebtRank initial stress")
    return parser


def _write_outputs(out, report_text, files):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / "report.json").write_text(report_text, encoding="utf-8")
    for name, (header, rows) in files.items():
        write_csv(path / name, header, rows)


def run(argv=None):
    """Execute a command; returns ``(exit_code, report_dict)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    report = {"schema_version": SCHEMA_VERSION, "command": args.command, "version": __version__}
    try:
        cfg = apply_flags(load_settings(args.config), args)
        echo = _echo(cfg)
        report.update({"config": echo, "config_hash": config_hash(echo), "seed": cfg["simulation"]["seed"]})
        if args.command in ("simulate", "rank", "impact", "beta"):
            simulation_config(cfg)  # validate before any path runs
        body, files = HANDLERS[args.command](cfg)
        report["result"] = body
        code = EXIT_OK
    except (ConfigError, LoadError, DomainError, OSError) as exc:
        report["error"] = {"kind": "validation", "type": type(exc).__name__, "message": str(exc)}
        files, code = {}, EXIT_VALIDATION
    except (FactorizationError, CalibrationError, InferenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        report["error"] = {"kind": "numerical", "type": type(exc).__name__, "message": str(exc)}
        files, code = {}, EXIT_NUMERICAL
    text = dump_report(report)
    if code != EXIT_OK:
        print(f"pdmodel {args.command}: {report['error']['message']}", file=sys.stderr)
    if args.out:
        _write_outputs(args.out, text, files)
    else:
        sys.stdout.write(text)
    return code, report


def main(argv=None):
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())

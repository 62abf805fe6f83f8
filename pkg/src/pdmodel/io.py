"""CSV ingestion and report emission."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .kernel import DomainError
from .model import BankNode, ExposureNetwork
from .inference import AggregateMarginals

SCHEMA_VERSION = "1"
BANK_COLUMNS = (
    "name",
    "total_exposures",
    "capital",
    "intra_financial_assets",
    "intra_financial_liabilities",
)
DEFAULT_LGD = 0.6


class LoadError(ValueError):
    def __init__(self, message, row=None, column=None):
        where = ""
        if row is not None:
            where = f"row {row}"
            if column is not None:
                where += f", column {column!r}"
            where += ": "
        super().__init__(where + message)
        self.row = row
        self.column = column


def bundled(name):
    """Path of a data file shipped with the package (``gsib_like.csv``, ``rating_map.csv``)."""
    return Path(str(resources.files("pdmodel") / "data" / name))


def load_rating_map(path):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"rating", "pd"} <= set(reader.fieldnames):
            raise LoadError("rating map needs columns 'rating' and 'pd'")
        for row_no, row in enumerate(reader, start=2):
            pd = _positive(row, "pd", row_no)
            if not 0 < pd < 1:
                raise LoadError("pd must lie in (0, 1)", row_no, "pd")
            out[row["rating"].strip()] = pd
    return out


def _positive(row, col, row_no, allow_zero=False):
    raw = (row.get(col) or "").strip()
    try:
        v = float(raw)
    except ValueError:
        raise LoadError(f"cannot parse {raw!r} as a number", row_no, col) from None
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise LoadError(f"value {raw!r} must be {'nonnegative' if allow_zero else 'positive'}", row_no, col)
    return v


def load_banks(path, rating_map=None, lgd=None, capital_scale=1.0):
    """Read the bank table.

    Returns ``(banks, marginals)``. PD comes from the ``pd0`` column when
    present and nonblank, otherwise from ``rating`` via ``rating_map``
    (a dict or a CSV path). LGD comes from an ``lgd`` column, then the
    ``lgd`` argument, then 0.6. Row numbers in errors count the header as
    row 1.
    """
    if rating_map is not None and not isinstance(rating_map, dict):
        rating_map = load_rating_map(rating_map)
    banks, assets, liabs = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in BANK_COLUMNS if c not in header]
        if missing:
            raise LoadError(f"missing columns {missing}")
        if "pd0" not in header and "rating" not in header:
            raise LoadError("need a 'pd0' or 'rating' column")
        for row_no, row in enumerate(reader, start=2):
            name = (row["name"] or "").strip()
            if not name:
                raise LoadError("empty name", row_no, "name")
            A = _positive(row, "total_exposures", row_no)
            E = _positive(row, "capital", row_no) * capital_scale
            if E >= A:
                raise LoadError(f"capital {E} must be below total exposures {A}", row_no, "capital")
            ia = _positive(row, "intra_financial_assets", row_no, allow_zero=True)
            il = _positive(row, "intra_financial_liabilities", row_no, allow_zero=True)
            if (row.get("pd0") or "").strip():
                pd = _positive(row, "pd0", row_no)
                if not pd < 1:
                    raise LoadError("pd0 must lie in (0, 1)", row_no, "pd0")
            else:
                rating = (row.get("rating") or "").strip()
                if rating_map is None:
                    raise LoadError("no pd0 given and no rating map supplied", row_no, "rating")
                if rating not in rating_map:
                    raise LoadError(f"rating {rating!r} not in rating map", row_no, "rating")
                pd = rating_map[rating]
            if (row.get("lgd") or "").strip():
                node_lgd = _positive(row, "lgd", row_no, allow_zero=True)
                if node_lgd > 1:
                    raise LoadError("lgd must lie in [0, 1]", row_no, "lgd")
            else:
                node_lgd = DEFAULT_LGD if lgd is None else lgd
            try:
                banks.append(BankNode(len(banks), name, A, E, pd, node_lgd))
            except DomainError as exc:
                raise LoadError(str(exc), row_no) from None
            assets.append(ia)
            liabs.append(il)
    if not banks:
        raise LoadError("no banks in file")
    return banks, AggregateMarginals(np.array(assets), np.array(liabs))


def load_network(path, banks):
    """Edge list ``from,to,amount``: ``from`` is exposed to the default of ``to``."""
    index = {b.name: b.id for b in banks}
    n = len(banks)
    a = np.zeros((n, n))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"from", "to", "amount"} <= set(reader.fieldnames):
            raise LoadError("network file needs columns from,to,amount")
        for row_no, row in enumerate(reader, start=2):
            ends = []
            for col in ("from", "to"):
                key = row[col].strip()
                if key in index:
                    ends.append(index[key])
                elif key.isdigit() and int(key) < n:
                    ends.append(int(key))
                else:
                    raise LoadError(f"unknown bank {key!r}", row_no, col)
            amt = _positive(row, "amount", row_no, allow_zero=True)
            if ends[0] == ends[1]:
                raise LoadError("self-exposure not allowed", row_no, "to")
            a[ends[0], ends[1]] += amt
    return ExposureNetwork(a)


def write_network(path, net, banks):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "amount"])
        for i, j in zip(*np.nonzero(net.a)):
            w.writerow([banks[i].name, banks[j].name, repr(float(net.a[i, j]))])


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def config_hash(config: dict):
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def dump_report(report: dict):
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"

"""Pairwise industry proximity matrices.

Four channels are supported:

* ``EG``  co-agglomeration of regional employment,
* ``L``   labour pooling (correlation of occupation mixes),
* ``IO``  customer/supplier intensity from an input-output table,
* ``K``   knowledge flows from cross-industry patent citations.

All matrices are exactly symmetric: each unordered pair is computed once and
mirrored. Diagonal entries are kept but flagged as excluded from analysis.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InputError, NumericError
from .ingest import CitationTable, EmploymentTable, FlowTable, OccupationTable

log = logging.getLogger(__name__)


class Channel(str, Enum):
    EG = "EG"
    L = "L"
    IO = "IO"
    K = "K"


@dataclass(frozen=True)
class ProximityMatrix:
    channel: Channel
    industries: tuple[str, ...]
    values: np.ndarray
    # pairs whose value is undefined (NaN in ``values``), as index pairs i < j
    undefined: tuple[tuple[int, int], ...] = ()
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.industries)

    def pair(self, i: int, j: int) -> float:
        if i == j:
            raise IndexError("diagonal entries are excluded from analysis")
        return float(self.values[i, j])

    def upper(self) -> np.ndarray:
        """Off-diagonal values for pairs i < j in catalog order."""
        return self.values[np.triu_indices(self.n, k=1)]


def mirror_upper(a: np.ndarray) -> np.ndarray:
    """Copy the upper triangle (diagonal included) into the lower one."""
    out = np.triu(a)
    il = np.tril_indices(a.shape[0], k=-1)
    out[il] = out.T[il]
    return out


def _shares(emp: EmploymentTable, x_mode: str):
    values = np.asarray(emp.values, dtype=float)
    totals = values.sum(axis=1)
    if (totals <= 0).any():
        bad = [emp.industries[i] for i in np.flatnonzero(totals <= 0)]
        raise NumericError(f"EG: industries with zero total employment: {bad}")
    s = values / totals[:, None]
    if x_mode == "national":
        x = values.sum(axis=0) / values.sum()
    elif x_mode == "mean":
        x = s.mean(axis=0)
    else:
        raise InputError(f"unknown x_mode {x_mode!r}; expected 'national' or 'mean'")
    return s, x


def eg_from_shares(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Co-agglomeration for industry shares ``s`` (industries x regions) and
    regional baseline ``x``."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if s.shape[1] < 2:
        raise NumericError("EG: at least two regions are required")
    denom = 1.0 - np.sum(x ** 2)
    if not denom > 0:
        raise NumericError("EG: 1 - sum(x_r^2) must be positive")
    dev = s - x
    return mirror_upper(dev @ dev.T / denom)


def eg_index(emp: EmploymentTable, x_mode: str = "national") -> ProximityMatrix:
    """Ellison-Glaeser co-agglomeration between every pair of industries.

    ``x_mode="national"`` uses each region's share of total employment as the
    baseline; ``"mean"`` uses the average over industries of their regional
    shares.
    """
    s, x = _shares(emp, x_mode)
    return ProximityMatrix(Channel.EG, tuple(emp.industries), eg_from_shares(s, x),
                           notes={"x_mode": x_mode})


def labour_pooling(occ: OccupationTable) -> ProximityMatrix:
    """Pearson correlation of occupation-employment vectors.

    Industries whose occupation vector has zero variance get NaN entries,
    which are listed in ``undefined``.
    """
    E = np.asarray(occ.values, dtype=float)
    n = E.shape[0]
    centred = E - E.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centred ** 2, axis=1))
    bad = norms == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        z = centred / norms[:, None]
    corr = np.clip(z @ z.T, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    corr[bad, :] = np.nan
    corr[:, bad] = np.nan
    corr = mirror_upper(corr)
    undefined = tuple((i, j) for i in range(n) for j in range(i + 1, n) if bad[i] or bad[j])
    if bad.any():
        names = [occ.industries[i] for i in np.flatnonzero(bad)]
        log.warning("labour pooling undefined for zero-variance industries: %s", names)
    return ProximityMatrix(Channel.L, tuple(occ.industries), corr, undefined,
                           notes={"zero_variance": [occ.industries[i] for i in np.flatnonzero(bad)]})


def _ratio(num, den):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    return np.where(den > 0, out, 0.0)


def flow_ratio_candidates(X: np.ndarray) -> np.ndarray:
    """The four normalised flows for every ordered pair, shape (4, n, n).

    For the pair (i, j): the flow i->j over j's purchases, the flow j->i over
    i's purchases, the flow i->j over i's sales and the flow j->i over j's
    sales. 0/0 is taken as 0. The diagonal of ``X`` is ignored.
    """
    X = np.array(X, dtype=float)
    np.fill_diagonal(X, 0.0)
    bought = X.sum(axis=0)  # column sums: total purchases of each buyer
    sold = X.sum(axis=1)  # row sums: total sales of each seller
    return np.stack([
        _ratio(X, bought[None, :]),
        _ratio(X.T, bought[:, None]),
        _ratio(X, sold[:, None]),
        _ratio(X.T, sold[None, :]),
    ])


def _max_normalised(X: np.ndarray) -> np.ndarray:
    out = mirror_upper(flow_ratio_candidates(X).max(axis=0))
    np.fill_diagonal(out, 0.0)
    return out


def io_proximity(flows: FlowTable) -> ProximityMatrix:
    """Customer/supplier proximity: the largest normalised bilateral flow."""
    return ProximityMatrix(Channel.IO, tuple(flows.industries), _max_normalised(flows.values))


def knowledge_proximity(cites: CitationTable) -> ProximityMatrix:
    """Knowledge proximity from citation counts; same functional form as IO."""
    values = _max_normalised(cites.values)
    X = np.asarray(cites.values)
    off = X - np.diag(np.diag(X))
    inactive = np.flatnonzero((off.sum(axis=0) + off.sum(axis=1)) == 0)
    sparse = [cites.industries[i] for i in inactive]
    if sparse:
        log.info("knowledge proximity: %d industries with no citations", len(sparse))
    return ProximityMatrix(Channel.K, tuple(cites.industries), values, notes={"sparse": sparse})


# ---------------------------------------------------------------- export


def write_long(pm: ProximityMatrix, path) -> Path:
    """Write ``industry_i,industry_j,value`` for i < j plus a ``.flags.json`` sidecar."""
    path = Path(path)
    n = pm.n
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["industry_i", "industry_j", "value"])
        for i in range(n):
            for j in range(i + 1, n):
                v = pm.values[i, j]
                w.writerow([pm.industries[i], pm.industries[j], "" if np.isnan(v) else repr(float(v))])
    sidecar = {
        "channel": pm.channel.value,
        "diagonal_excluded": True,
        "diagonal": [None if np.isnan(v) else float(v) for v in np.diag(pm.values)],
        "undefined_pairs": [[pm.industries[i], pm.industries[j]] for i, j in pm.undefined],
        "notes": pm.notes,
    }
    flags = path.with_suffix(".flags.json")
    flags.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_long(path, industries, channel) -> ProximityMatrix:
    """Inverse of :func:`write_long` against a known industry ordering."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"missing proximity file {path}")
    index = {k: i for i, k in enumerate(industries)}
    n = len(industries)
    values = np.full((n, n), np.nan)
    seen = np.zeros((n, n), dtype=bool)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["industry_i", "industry_j", "value"]:
            raise InputError(f"{path}: bad header {header!r}")
        for row in reader:
            if len(row) != 3:
                raise InputError(f"{path}: malformed row at line {reader.line_num}")
            a, b, v = row
            if a not in index or b not in index:
                raise InputError(f"{path}: unknown industry at line {reader.line_num}")
            i, j = sorted((index[a], index[b]))
            values[i, j] = float(v) if v else np.nan
            seen[i, j] = True
    if not seen[np.triu_indices(n, k=1)].all():
        raise InputError(f"{path}: incomplete pair list")
    flags = path.with_suffix(".flags.json")
    undefined: tuple = ()
    notes = {}
    if flags.is_file():
        meta = json.loads(flags.read_text(encoding="utf-8"))
        diag = meta.get("diagonal", [])
        for i, d in enumerate(diag):
            values[i, i] = np.nan if d is None else d
        undefined = tuple(tuple(sorted((index[a], index[b]))) for a, b in meta.get("undefined_pairs", []))
        notes = meta.get("notes", {})
    return ProximityMatrix(Channel(channel), tuple(industries), mirror_upper(values), undefined, notes)

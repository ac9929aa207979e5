"""Relating community channel coefficients to workforce education.

Community estimates from several partitions are pooled and the channel
coefficient is regressed on the community's mean years of education. Three
weighting schemes are available:

``OLS``    every community weighs 1;
``WLSI``   each partition carries the same total weight, split equally over
           its communities;
``WLSII``  each partition carries the same total weight, split in proportion
           to community size.

Coefficients that are insignificant at 10% or 5% can be set to zero first.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channels import ChannelEstimate, Fit, wls_fit
from .errors import DegenerateError, InputError

log = logging.getLogger(__name__)

SCHEMES = ("OLS", "WLSI", "WLSII")
ZEROING = {"none": None, "at10pct": 0.10, "at5pct": 0.05}


@dataclass(frozen=True)
class CommunityRecord:
    partition: str
    community: int
    size: int
    education: float
    estimates: dict = field(default_factory=dict)  # channel -> ChannelEstimate


@dataclass(frozen=True)
class EducationFit:
    scheme: str
    zeroing: str
    channel: str  # "L", "IO", or a difference such as "L-IO"
    fit: Fit
    n_communities: int
    n_partitions: int
    n_excluded: int = 0
    note: str = ""

    @property
    def b(self) -> float:
        return self.fit.beta

    @property
    def se(self) -> float:
        return self.fit.se

    @property
    def r2(self) -> float:
        return self.fit.r2


def zeroed_beta(est: ChannelEstimate, zeroing: str = "none") -> float:
    """The coefficient, or 0 when it is insignificant at the zeroing level."""
    if zeroing not in ZEROING:
        raise InputError(f"unknown zeroing {zeroing!r}; expected one of {list(ZEROING)}")
    level = ZEROING[zeroing]
    if not est.defined:
        return math.nan
    if level is not None and not est.fit.p_value < level:
        return 0.0
    return est.fit.beta


def scheme_weights(partitions, sizes, scheme: str) -> np.ndarray:
    """Per-community weights; partitions end up with equal totals under WLS schemes."""
    if scheme not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    partitions = list(partitions)
    sizes = np.asarray(sizes, dtype=float)
    if scheme == "OLS":
        return np.ones(len(partitions))
    count = defaultdict(int)
    total = defaultdict(float)
    for p, s in zip(partitions, sizes):
        count[p] += 1
        total[p] += s
    if scheme == "WLSI":
        return np.array([1.0 / count[p] for p in partitions])
    return np.array([s / total[p] for p, s in zip(partitions, sizes)])


def _dependent(record: CommunityRecord, channel: str, zeroing: str) -> float:
    parts = channel.split("-")
    vals = []
    for ch in parts:
        est = record.estimates.get(ch)
        vals.append(math.nan if est is None else zeroed_beta(est, zeroing))
    if len(vals) == 1:
        return vals[0]
    if len(vals) == 2:
        return vals[0] - vals[1]
    raise InputError(f"bad channel spec {channel!r}")


def _collect(records, channel, zeroing, min_size=1):
    rows = [(r, _dependent(r, channel, zeroing)) for r in records]
    rows = [(r, math.nan if r.size < min_size else y) for r, y in rows]
    kept = [(r, y) for r, y in rows if not math.isnan(y) and not math.isnan(r.education)]
    return kept, len(rows) - len(kept)


def education_regression(records, scheme: str = "OLS", zeroing: str = "none",
                         channels=("L", "IO"), min_size: int = 1) -> list[EducationFit]:
    """Pooled regressions of community coefficients on mean education.

    Returns one fit per channel plus one for the difference of the first two
    channels (e.g. ``L-IO``). Communities with undefined estimates, or with
    fewer than ``min_size`` members, are excluded and counted in
    ``n_excluded``.
    """
    records = list(records)
    targets = list(channels)
    if len(channels) >= 2:
        targets.append(f"{channels[0]}-{channels[1]}")
    out = []
    for channel in targets:
        kept, excluded = _collect(records, channel, zeroing, min_size)
        if excluded:
            log.info("education %s/%s/%s: excluded %d communities", scheme, zeroing, channel, excluded)
        if len(kept) < 3:
            raise DegenerateError(f"education regression needs at least 3 communities, got {len(kept)}")
        recs = [r for r, _ in kept]
        y = np.array([v for _, v in kept])
        x = np.array([r.education for r in recs])
        w = scheme_weights([r.partition for r in recs], [r.size for r in recs], scheme)
        note = ""
        if not np.any(y != 0):
            note = "all_zero_after_zeroing"
            log.warning("education %s/%s/%s: every coefficient is zero", scheme, zeroing, channel)
        fit = wls_fit(x, y, w)
        out.append(EducationFit(scheme, zeroing, channel, fit, len(recs),
                                len({r.partition for r in recs}), excluded, note))
    return out


def per_partition_fits(records, scheme: str = "OLS", zeroing: str = "none",
                       channels=("L", "IO"), min_size: int = 1) -> list[tuple[str, EducationFit]]:
    """The same regression run separately inside each partition.

    Two-community partitions yield the slope only (standard error NaN);
    partitions with fewer usable communities are skipped.
    """
    by_part = defaultdict(list)
    for r in records:
        by_part[r.partition].append(r)
    targets = list(channels)
    if len(channels) >= 2:
        targets.append(f"{channels[0]}-{channels[1]}")
    out = []
    for part, recs in by_part.items():
        for channel in targets:
            kept, excluded = _collect(recs, channel, zeroing, min_size)
            if len(kept) < 2:
                continue
            x = np.array([r.education for r, _ in kept])
            y = np.array([v for _, v in kept])
            sizes = [r.size for r, _ in kept]
            w = np.ones(len(kept)) if scheme != "WLSII" else np.asarray(sizes, dtype=float)
            if len(kept) == 2:
                if x[0] == x[1]:
                    continue
                beta = (y[1] - y[0]) / (x[1] - x[0])
                fit = Fit(float(y[0] - beta * x[0]), float(beta), math.nan, math.nan, math.nan,
                          1.0, 2)
            else:
                try:
                    fit = wls_fit(x, y, w)
                except ArithmeticError:
                    continue
            out.append((part, EducationFit(scheme, zeroing, channel, fit, len(kept), 1, excluded)))
    return out


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_fits(fits, path, partitions=None) -> Path:
    """CSV keyed by (scheme, zeroing, channel), optionally prefixed by partition."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["scheme", "zeroing", "channel", "b", "alpha", "se", "t", "p", "r2", "n_communities",
                "n_partitions", "n_excluded", "note"]
        if partitions is not None:
            head = ["partition"] + head
        w.writerow(head)
        for i, f in enumerate(fits):
            row = [f.scheme, f.zeroing, f.channel, _num(f.fit.beta), _num(f.fit.alpha),
                   _num(f.fit.se), _num(f.fit.t_stat), _num(f.fit.p_value), _num(f.fit.r2),
                   f.n_communities, f.n_partitions, f.n_excluded, f.note]
            if partitions is not None:
                row = [partitions[i]] + row
            w.writerow(row)
    return path

"""Channel coefficients: univariate regressions of co-agglomeration on a proximity.

Estimates are produced at three scopes: all industry pairs, the pairs
involving one industry, and the pairs inside one community.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import InputError, NumericError
from .proximity import ProximityMatrix
from .stability.partition import Partition

log = logging.getLogger(__name__)


class Fit(NamedTuple):
    alpha: float
    beta: float
    se: float
    t_stat: float
    p_value: float
    r2: float
    n: int


def _t_test(beta, se, df):
    if se > 0:
        t = beta / se
        return t, float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    if beta == 0:
        return 0.0, 1.0
    return math.copysign(math.inf, beta), 0.0


def wls_fit(xs, ys, weights=None) -> Fit:
    """Weighted least squares of ``ys`` on ``xs`` with an intercept.

    Standard errors are classical (homoskedastic in the weighted metric);
    the p-value is two-sided from Student's t with n - 2 degrees of freedom.
    ``weights=None`` gives ordinary least squares.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    n = len(x)
    if len(y) != n:
        raise InputError("xs and ys differ in length")
    if n < 3:
        raise NumericError(f"regression needs at least 3 observations, got {n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != n or (w < 0).any() or not np.isfinite(w).all():
        raise InputError("weights must be finite, nonnegative and match the data")
    sw = w.sum()
    if not sw > 0:
        raise NumericError("all regression weights are zero")
    xm = np.dot(w, x) / sw
    ym = np.dot(w, y) / sw
    dx = x - xm
    dy = y - ym
    sxx = np.dot(w, dx * dx)
    if not sxx > 0:
        raise NumericError("regressor has zero variance")
    beta = np.dot(w, dx * dy) / sxx
    alpha = ym - beta * xm
    resid = dy - beta * dx
    sse = float(np.dot(w, resid * resid))
    syy = float(np.dot(w, dy * dy))
    r2 = 0.0 if syy == 0 else min(1.0, max(0.0, 1.0 - sse / syy))
    se = math.sqrt(sse / (n - 2) / sxx)
    t, p = _t_test(float(beta), se, n - 2)
    return Fit(float(alpha), float(beta), se, float(t), p, float(r2), n)


def ols_fit(xs, ys) -> Fit:
    """Ordinary least squares of ``ys`` on ``xs`` with an intercept."""
    return wls_fit(xs, ys)


@dataclass(frozen=True)
class ChannelEstimate:
    scope_type: str  # "global" | "industry" | "community"
    scope_id: str
    channel: str
    fit: Fit | None
    n: int
    reason: str | None = None

    @property
    def defined(self) -> bool:
        return self.fit is not None

    def __getattr__(self, name):
        # expose alpha, beta, se, ... directly; NaN when undefined
        if name in Fit._fields:
            fit = self.__dict__.get("fit")
            if fit is None:
                return self.__dict__.get("n", 0) if name == "n" else math.nan
            return getattr(fit, name)
        raise AttributeError(name)

    def significant(self, level: float) -> bool:
        return self.defined and self.fit.p_value < level


def _check_pair(eg: ProximityMatrix, z: ProximityMatrix):
    if tuple(eg.industries) != tuple(z.industries):
        raise InputError("proximity matrices are indexed by different catalogs")


def _pairs(nodes):
    nodes = list(nodes)
    return [(a, b) for x, a in enumerate(nodes) for b in nodes[x + 1:]]


def _estimate(eg, z, pairs, scope_type, scope_id, channel) -> ChannelEstimate:
    if pairs:
        ii = np.array([p[0] for p in pairs])
        jj = np.array([p[1] for p in pairs])
        x = np.asarray(z.values)[ii, jj]
        y = np.asarray(eg.values)[ii, jj]
        ok = ~(np.isnan(x) | np.isnan(y))
        dropped = int((~ok).sum())
        if dropped:
            log.info("%s %s/%s: dropped %d pairs with undefined proximity",
                     scope_type, scope_id, channel, dropped)
        x, y = x[ok], y[ok]
    else:
        x = y = np.empty(0)
    n = len(x)
    if n < 3:
        return ChannelEstimate(scope_type, scope_id, channel, None, n, "too_few_pairs")
    try:
        fit = ols_fit(x, y)
    except NumericError:
        return ChannelEstimate(scope_type, scope_id, channel, None, n, "zero_variance")
    return ChannelEstimate(scope_type, scope_id, channel, fit, n)


def global_regression(eg: ProximityMatrix, z: ProximityMatrix, channel=None) -> ChannelEstimate:
    """One OLS of EG on Z over every unordered industry pair."""
    _check_pair(eg, z)
    channel = channel or z.channel.value
    est = _estimate(eg, z, _pairs(range(eg.n)), "global", "all", channel)
    if not est.defined:
        raise NumericError(f"global regression on {channel} undefined: {est.reason}")
    return est


def industry_regression(eg: ProximityMatrix, z: ProximityMatrix, channel=None) -> list[ChannelEstimate]:
    """For each industry i, OLS of EG_ij on Z_ij over all j != i."""
    _check_pair(eg, z)
    channel = channel or z.channel.value
    n = eg.n
    if n < 4:
        raise InputError("industry regressions need at least 4 industries")
    return [_estimate(eg, z, [(i, j) for j in range(n) if j != i], "industry",
                      eg.industries[i], channel) for i in range(n)]


def community_regression(eg: ProximityMatrix, z: ProximityMatrix, p: Partition, channel=None,
                         nodes=None, label: str = "") -> list[ChannelEstimate]:
    """OLS of EG on Z over the pairs inside each community of ``p``.

    ``nodes`` maps partition positions to catalog indices when the partition
    covers a subset of industries (e.g. one connected component).
    """
    _check_pair(eg, z)
    channel = channel or z.channel.value
    nodes = np.arange(eg.n) if nodes is None else np.asarray(nodes)
    if len(nodes) != p.n:
        raise InputError("partition size does not match the node mapping")
    out = []
    for c, members in enumerate(p.communities()):
        idx = sorted(int(nodes[m]) for m in members)
        scope = f"{label}:{c}" if label else str(c)
        est = _estimate(eg, z, _pairs(idx), "community", scope, channel)
        if len(idx) < 3:
            est = ChannelEstimate("community", scope, channel, None, est.n, "undersized")
        out.append(est)
    return out


def community_mean_education(edu, p: Partition, industries, weights=None) -> list[float]:
    """Mean years of education per community (NaN where a member is missing).

    ``industries`` gives the id of each partition position. ``weights``
    (e.g. employment) switches to a weighted mean.
    """
    values = edu.values if hasattr(edu, "values") else edu
    out = []
    for members in p.communities():
        ids = [industries[m] for m in members]
        missing = [i for i in ids if i not in values]
        if missing:
            log.warning("community missing education values for %s", missing)
            out.append(math.nan)
            continue
        ed = np.array([values[i] for i in ids], dtype=float)
        if weights is None:
            out.append(float(ed.mean()))
        else:
            w = np.array([weights[m] for m in members], dtype=float)
            out.append(float(np.dot(w, ed) / w.sum()))
    return out


# ---------------------------------------------------------------- export

ESTIMATE_HEADER = ["scope_type", "scope_id", "channel", "beta", "se", "t", "p", "r2", "n"]


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def estimate_row(e: ChannelEstimate) -> list[str]:
    if not e.defined:
        return [e.scope_type, e.scope_id, e.channel, "", "", "", "", "", str(e.n)]
    f = e.fit
    return [e.scope_type, e.scope_id, e.channel, _num(f.beta), _num(f.se), _num(f.t_stat),
            _num(f.p_value), _num(f.r2), str(f.n)]


def write_estimates(estimates, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATE_HEADER)
        w.writerows(estimate_row(e) for e in estimates)
    return path


def read_estimates(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"missing estimates file {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("beta", "se", "t", "p", "r2"):
            r[k] = float(r[k]) if r[k] else math.nan
        r["n"] = int(r["n"])
    return rows

"""Sweeps over Markov time, robustness by VI, and partition selection."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..network import TransitionSystem
from .kernel import MarkovKernel, Mode, StabilityScore, check_time, partition_stability
from .louvain import louvain_labels, stability_matrix
from .partition import Partition, mean_pairwise_vi

log = logging.getLogger(__name__)

# Mean VI over all run pairs up to 256 runs; beyond that, sample this many pairs.
VI_PAIR_CAP = 256 * 255 // 2


def time_grid(t_min=1e-2, t_max=1e2, points=120, log_spacing=True, mode="continuous") -> np.ndarray:
    """Markov times for a sweep. Discrete mode rounds to unique positive integers."""
    if points < 1 or t_min < 0 or t_max < t_min:
        raise InputError("invalid time grid")
    if log_spacing:
        if t_min <= 0:
            raise InputError("log-spaced grid needs t_min > 0")
        times = np.logspace(np.log10(t_min), np.log10(t_max), points)
    else:
        times = np.linspace(t_min, t_max, points)
    if Mode(mode) is Mode.DISCRETE:
        times = np.unique(np.maximum(1, np.rint(times))).astype(int)
    return times


def run_seeds(seed: int, time_index: int, repeats: int) -> np.ndarray:
    """Louvain seeds for one time point, derived from the master seed."""
    return np.random.SeedSequence([int(seed), int(time_index)]).generate_state(repeats)


@dataclass(frozen=True)
class TimePoint:
    t: float
    partition: Partition
    r: float
    mean_vi: float
    seeds: tuple[int, ...]

    @property
    def k(self) -> int:
        return self.partition.k


@dataclass(frozen=True)
class SweepResult:
    mode: Mode
    points: tuple[TimePoint, ...]
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def ks(self) -> np.ndarray:
        return np.array([p.k for p in self.points])

    @property
    def rs(self) -> np.ndarray:
        return np.array([p.r for p in self.points])

    @property
    def mean_vi(self) -> np.ndarray:
        return np.array([p.mean_vi for p in self.points])


def _one_time(args) -> TimePoint:
    ts, t, mode, seeds, vi_seed, kernel = args
    kernel = kernel or MarkovKernel(ts)
    B, linked = stability_matrix(kernel, t, mode)
    runs = []
    for s in seeds:
        labels = louvain_labels(B, linked, np.random.default_rng(int(s)))
        runs.append((partition_stability(B, labels), Partition(labels)))
    best = max(range(len(runs)), key=lambda i: (runs[i][0], -i))
    vi = mean_pairwise_vi([p for _, p in runs], rng=np.random.default_rng(vi_seed),
                          max_pairs=VI_PAIR_CAP)
    r_best, p_best = runs[best]
    return TimePoint(float(t), p_best, float(r_best), float(vi), tuple(int(s) for s in seeds))


def sweep(ts: TransitionSystem, times, repeats: int = 100, mode="continuous", seed: int = 0,
          workers: int = 1, kernel: MarkovKernel | None = None) -> SweepResult:
    """Run ``repeats`` seeded Louvain optimisations at each Markov time.

    For every time the best partition by stability is kept together with the
    mean pairwise variation of information across all runs.
    """
    mode = Mode(mode)
    times = [check_time(t, mode) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InputError("Markov times must be strictly increasing")
    if repeats < 2:
        raise InputError("a sweep needs at least two repeats per time")
    kernel = kernel or MarkovKernel(ts)
    tasks = [(ts, t, mode, run_seeds(seed, i, repeats), [int(seed), i, 1], None if workers > 1 else kernel)
             for i, t in enumerate(times)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_one_time, tasks))
    else:
        points = [_one_time(task) for task in tasks]
    return SweepResult(mode, tuple(points), int(seed), {"repeats": int(repeats)})


@dataclass(frozen=True)
class Selection:
    """Partitions picked from a sweep.

    ``minima`` holds (time, partition) at interior local minima of mean VI;
    ``by_k`` maps each community count k to the earliest time reaching it.
    """

    minima: tuple[tuple[float, Partition], ...]
    by_k: dict[int, tuple[float, Partition]]

    def all(self) -> list[tuple[float, Partition]]:
        seen, out = set(), []
        for t, p in list(self.minima) + [self.by_k[k] for k in sorted(self.by_k)]:
            if t not in seen:
                seen.add(t)
                out.append((t, p))
        return sorted(out, key=lambda x: x[0])


def local_minima(values, tol: float = 1e-12) -> list[int]:
    """Indices of strict interior local minima; a plateau reports its first index."""
    v = np.asarray(values, dtype=float)
    runs = []  # (start, end) of runs of equal values
    start = 0
    for i in range(1, len(v) + 1):
        if i == len(v) or abs(v[i] - v[start]) > tol:
            runs.append((start, i - 1))
            start = i
    out = []
    for s, e in runs:
        if s == 0 or e == len(v) - 1:
            continue
        if v[s - 1] > v[s] + tol and v[e + 1] > v[s] + tol:
            out.append(s)
    return out


def select_partitions(sr: SweepResult) -> Selection:
    minima = tuple((sr.points[i].t, sr.points[i].partition) for i in local_minima(sr.mean_vi))
    by_k: dict[int, tuple[float, Partition]] = {}
    for p in sr.points:
        by_k.setdefault(p.k, (p.t, p.partition))
    return Selection(minima, dict(sorted(by_k.items())))


def external_partition(labels, nodes=None) -> Partition:
    """Partition from per-node labels (e.g. sector ids).

    ``labels`` may be a sequence aligned with the nodes or a mapping from node
    id to label, in which case ``nodes`` restricts it. Labels left without
    members after the restriction are dropped and logged.
    """
    if isinstance(labels, dict):
        if nodes is None:
            raise InputError("nodes are required with a label mapping")
        missing = [n for n in nodes if n not in labels]
        if missing:
            raise InputError(f"external partition has no label for {missing}")
        dropped = sorted(set(labels.values()) - {labels[n] for n in nodes})
        if dropped:
            log.info("external partition: %d labels have no members in the analysed nodes: %s",
                     len(dropped), dropped)
        labels = [labels[n] for n in nodes]
    _, codes = np.unique(np.asarray(labels, dtype=object).astype(str), return_inverse=True)
    return Partition(codes)


def score_external_partition(ts: TransitionSystem, p_ext: Partition, times, mode="continuous",
                             kernel: MarkovKernel | None = None) -> list[StabilityScore]:
    """Stability of a fixed partition across the time grid."""
    if p_ext.n != ts.n:
        raise InputError(f"external partition covers {p_ext.n} nodes, network has {ts.n}")
    kernel = kernel or MarkovKernel(ts)
    mode = Mode(mode)
    out = []
    for t in times:
        B = kernel.autocovariance_matrix(t, mode)
        out.append(StabilityScore(float(t), partition_stability(B, p_ext.assignment), mode))
    return out

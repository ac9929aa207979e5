"""Weighted co-agglomeration network, random-walk quantities and null models."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateError, InputError, NumericError
from .proximity import ProximityMatrix

log = logging.getLogger(__name__)

CLIP_POLICIES = ("clip", "shift-min", "abs")


@dataclass(frozen=True)
class WeightedNetwork:
    """Undirected graph with a symmetric nonnegative weight matrix (zero diagonal)."""

    nodes: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] != len(self.nodes):
            raise InputError("weights must be a square matrix matching the node list")
        if (w < 0).any():
            raise InputError("network weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise InputError("network diagonal must be zero")
        if not np.array_equal(w, w.T):
            raise InputError("network weights must be symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @property
    def total_weight(self) -> float:
        """Sum of edge weights, each undirected edge counted once."""
        return float(self.weights[np.triu_indices(self.n, k=1)].sum())

    def edges(self) -> list[tuple[int, int, float]]:
        iu, ju = np.nonzero(np.triu(self.weights, k=1))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(iu, ju)]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights, k=1)))

    def isolated(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.degrees == 0)]

    def components(self) -> np.ndarray:
        """Connected-component label per node (isolated nodes get their own)."""
        _, labels = connected_components(csr_matrix(self.weights), directed=False)
        return labels

    def subnetwork(self, keep) -> "WeightedNetwork":
        keep = np.asarray(sorted(keep), dtype=int)
        return WeightedNetwork(tuple(self.nodes[i] for i in keep),
                               self.weights[np.ix_(keep, keep)].copy())

    def largest_component(self) -> tuple["WeightedNetwork", np.ndarray]:
        """The largest connected component and the indices of its nodes.

        Ties go to the component containing the lowest node index.
        """
        labels = self.components()
        counts = np.bincount(labels)
        # component ids are assigned in order of first node, so argmax breaks ties low
        keep = np.flatnonzero(labels == int(np.argmax(counts)))
        return self.subnetwork(keep), keep

    def scaled(self, c: float) -> "WeightedNetwork":
        return WeightedNetwork(self.nodes, self.weights * c)


@dataclass(frozen=True)
class TransitionSystem:
    """Random walk ``M = D^-1 W`` with stationary distribution ``pi ~ degrees``."""

    network: WeightedNetwork
    M: np.ndarray
    pi: np.ndarray

    @property
    def n(self) -> int:
        return len(self.pi)


def build_network(eg: ProximityMatrix, clip: str = "clip") -> WeightedNetwork:
    """Turn a co-agglomeration matrix into nonnegative edge weights.

    ``clip`` zeroes negative entries; ``shift-min`` subtracts the most
    negative off-diagonal value; ``abs`` takes magnitudes. Undefined entries
    become non-edges.
    """
    if clip not in CLIP_POLICIES:
        raise InputError(f"unknown clip policy {clip!r}; expected one of {CLIP_POLICIES}")
    v = np.array(eg.values, dtype=float)
    if not np.array_equal(np.nan_to_num(v), np.nan_to_num(v.T)):
        raise InputError("proximity matrix is not symmetric")
    np.fill_diagonal(v, 0.0)
    v = np.nan_to_num(v, nan=0.0)
    if clip == "clip":
        w = np.where(v > 0, v, 0.0)
    elif clip == "abs":
        w = np.abs(v)
    else:
        off = v[~np.eye(len(v), dtype=bool)]
        w = v - min(off.min(), 0.0) if off.size else v
        np.fill_diagonal(w, 0.0)
    net = WeightedNetwork(tuple(eg.industries), w)
    if net.n_edges == 0:
        raise DegenerateError("network has no edges after clipping")
    iso = net.isolated()
    if iso:
        log.info("%d isolated nodes after %s: %s", len(iso), clip, [net.nodes[i] for i in iso])
    return net


def transition_system(net: WeightedNetwork) -> TransitionSystem:
    d = net.degrees
    if (d <= 0).any():
        bad = [net.nodes[i] for i in np.flatnonzero(d <= 0)]
        raise NumericError(f"zero-degree nodes cannot host a random walk: {bad}")
    M = net.weights / d[:, None]
    pi = d / d.sum()
    M.setflags(write=False)
    pi.setflags(write=False)
    return TransitionSystem(net, M, pi)


def _pair_from_index(k: np.ndarray, n: int):
    """Inverse of the row-major enumeration of pairs i < j."""
    iu, ju = np.triu_indices(n, k=1)
    return iu[k], ju[k]


def shuffle_null(net: WeightedNetwork, seed, variant: str = "uniform",
                 max_tries: int | None = None) -> WeightedNetwork:
    """Random network with the same nodes, edge count and edge-weight multiset.

    ``uniform`` places the edges on distinct node pairs drawn uniformly
    without replacement. ``degree`` applies double-edge swaps, so each node
    keeps its number of edges (weights travel with the swapped edges).
    """
    rng = np.random.default_rng(seed)
    edges = net.edges()
    m, n = len(edges), net.n
    if m == 0:
        raise InputError("shuffle_null needs at least one edge")
    weights = np.array([w for _, _, w in edges])
    if variant == "uniform":
        n_pairs = n * (n - 1) // 2
        if m > n_pairs:
            raise DegenerateError(f"cannot place {m} edges on {n_pairs} node pairs")
        picks = rng.choice(n_pairs, size=m, replace=False)
        iu, ju = _pair_from_index(picks, n)
        w = rng.permutation(weights)
    elif variant == "degree":
        iu, ju, w = _double_edge_swap(edges, n, rng, max_tries or 100 * m)
    else:
        raise InputError(f"unknown null variant {variant!r}; expected 'uniform' or 'degree'")
    out = np.zeros((n, n))
    out[iu, ju] = w
    out[ju, iu] = w
    return WeightedNetwork(net.nodes, out)


def _double_edge_swap(edges, n, rng, max_tries):
    u = np.array([e[0] for e in edges])
    v = np.array([e[1] for e in edges])
    w = np.array([e[2] for e in edges])
    m = len(edges)
    present = {(int(a), int(b)) for a, b in zip(u, v)}
    target, done, tries = 10 * m, 0, 0
    while done < target and tries < max_tries:
        tries += 1
        a, b = rng.integers(m, size=2)
        if a == b:
            continue
        x, y, p, q = u[a], v[a], u[b], v[b]
        if rng.random() < 0.5:
            p, q = q, p
        # (x,y),(p,q) -> (x,q),(p,y)
        if len({x, y, p, q}) < 4:
            continue
        e1, e2 = (min(x, q), max(x, q)), (min(p, y), max(p, y))
        if e1 in present or e2 in present:
            continue
        present.discard((min(x, y), max(x, y)))
        present.discard((min(p, q), max(p, q)))
        present.add(e1)
        present.add(e2)
        u[a], v[a] = e1
        u[b], v[b] = e2
        done += 1
    if done == 0 and m >= 2:
        log.warning("degree-preserving shuffle made no swaps in %d tries", tries)
    return u, v, w


def top_fraction_subgraph(net: WeightedNetwork, q: float) -> WeightedNetwork:
    """Keep the ``ceil(q * |E|)`` heaviest edges (for display only).

    Ties are broken by pair order in the catalog.
    """
    if not 0 < q <= 1:
        raise InputError("q must lie in (0, 1]")
    edges = net.edges()
    keep = math.ceil(q * len(edges) - 1e-9)
    ranked = sorted(edges, key=lambda e: (-e[2], e[0], e[1]))[:keep]
    out = np.zeros_like(net.weights)
    for i, j, w in ranked:
        out[i, j] = out[j, i] = w
    return WeightedNetwork(net.nodes, out)


def write_edges_csv(net: WeightedNetwork, path) -> Path:
    path = Path(path)
    lines = ["source,target,weight"]
    lines += [f"{net.nodes[i]},{net.nodes[j]},{w!r}" for i, j, w in net.edges()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_edges_csv(path, nodes) -> WeightedNetwork:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"missing edge list {path}")
    index = {k: i for i, k in enumerate(nodes)}
    w = np.zeros((len(nodes), len(nodes)))
    rows = path.read_text(encoding="utf-8").splitlines()
    if not rows or rows[0] != "source,target,weight":
        raise InputError(f"{path}: bad header")
    for line_no, row in enumerate(rows[1:], start=2):
        parts = row.split(",")
        if len(parts) != 3 or parts[0] not in index or parts[1] not in index:
            raise InputError(f"{path}: malformed row at line {line_no}")
        i, j = index[parts[0]], index[parts[1]]
        w[i, j] = w[j, i] = float(parts[2])
    return WeightedNetwork(tuple(nodes), w)


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(net: WeightedNetwork, labels=None, name: str = "EG") -> str:
    """Graphviz source for an undirected weighted network.

    ``labels`` optionally maps node index to a community id, emitted as a
    ``community`` node attribute.
    """
    out = [f"graph {name} {{"]
    for i, node in enumerate(net.nodes):
        attr = f" [community={int(labels[i])}]" if labels is not None else ""
        out.append(f"  {_dot_id(node)}{attr};")
    for i, j, w in net.edges():
        out.append(f"  {_dot_id(net.nodes[i])} -- {_dot_id(net.nodes[j])} [weight={w!r}];")
    out.append("}")
    return "\n".join(out) + "\n"

"""Louvain heuristic for maximising Markov Stability at a fixed time."""

from __future__ import annotations

import numpy as np

from ..network import TransitionSystem
from .kernel import MarkovKernel
from .partition import Partition, canonical_labels


def _tolerance(B: np.ndarray) -> float:
    scale = float(np.max(np.abs(B))) if B.size else 0.0
    return 1e-12 * max(scale, 1e-300)


def louvain_labels(B: np.ndarray, linked: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Greedy node moves plus aggregation on a symmetric quality matrix.

    The quality of a labelling is ``sum_c sum_{i,j in c} B[i, j]``. A node is
    only offered communities it is ``linked`` to. Moves must improve the
    quality strictly (beyond round-off), which guarantees termination.
    """
    B = np.asarray(B, dtype=float)
    linked = np.asarray(linked, dtype=bool)
    n = B.shape[0]
    membership = np.arange(n)
    tol = _tolerance(B)
    while True:
        m = B.shape[0]
        comm = np.arange(m)
        S = B.copy()  # S[i, c]: total of B between node i and community c
        A = linked.astype(np.int64)  # A[i, c]: links from node i into community c
        diag = np.diag(B)
        moved_any = False
        while True:
            moved = False
            for i in rng.permutation(m):
                a = comm[i]
                own = S[i, a] - diag[i]
                cand = np.flatnonzero(A[i] > 0)
                cand = cand[cand != a]
                if cand.size == 0:
                    continue
                gains = S[i, cand] - own
                best = int(np.argmax(gains))
                if gains[best] > tol:
                    b = cand[best]
                    S[:, a] -= B[:, i]
                    S[:, b] += B[:, i]
                    A[:, a] -= linked[:, i]
                    A[:, b] += linked[:, i]
                    comm[i] = b
                    moved = moved_any = True
            if not moved:
                break
        if not moved_any:
            break
        labels = canonical_labels(comm)
        k = int(labels.max()) + 1
        H = np.zeros((m, k))
        H[np.arange(m), labels] = 1.0
        B = H.T @ B @ H
        B = (B + B.T) / 2.0
        linked = (H.T @ linked.astype(float) @ H) > 0
        membership = labels[membership]
        if k == 1:
            break
    return canonical_labels(membership)


def stability_matrix(kernel: MarkovKernel, t, mode):
    """Node-level autocovariance and the link mask used by Louvain."""
    F = kernel.flow(t, mode)
    B = F - np.outer(kernel.pi, kernel.pi)
    linked = F > 1e-13 * float(np.max(np.abs(F)))
    np.fill_diagonal(linked, False)
    return B, linked


def louvain_maximize(ts: TransitionSystem, t, mode="continuous", seed=0,
                     kernel: MarkovKernel | None = None) -> Partition:
    """Locally optimal partition of Markov Stability at time ``t``.

    ``seed`` fixes the order in which nodes are visited.
    """
    kernel = kernel or MarkovKernel(ts)
    B, linked = stability_matrix(kernel, t, mode)
    return Partition(louvain_labels(B, linked, np.random.default_rng(seed)))

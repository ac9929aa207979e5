"""Node partitions and the variation of information between them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError


def canonical_labels(labels) -> np.ndarray:
    """Relabel communities 0..k-1 in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse.ravel()].astype(np.int64)


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of ``n`` nodes to ``k`` nonempty communities.

    Labels are always canonical (contiguous, ordered by first member), so two
    partitions grouping the same nodes compare equal.
    """

    assignment: np.ndarray

    def __post_init__(self):
        a = canonical_labels(self.assignment)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @classmethod
    def from_communities(cls, communities, n: int | None = None) -> "Partition":
        members = [int(i) for c in communities for i in c]
        n = len(members) if n is None else n
        if sorted(members) != list(range(n)):
            raise InputError("communities must cover every node exactly once")
        labels = np.empty(n, dtype=np.int64)
        for c, nodes in enumerate(communities):
            labels[list(nodes)] = c
        return cls(labels)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(np.arange(n))

    @classmethod
    def whole(cls, n: int) -> "Partition":
        return cls(np.zeros(n, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def k(self) -> int:
        return int(self.assignment.max()) + 1 if self.n else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def communities(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for i, c in enumerate(self.assignment):
            out[c].append(i)
        return out

    def indicator(self) -> np.ndarray:
        """The n x k 0/1 matrix H with one 1 per row."""
        H = np.zeros((self.n, self.k))
        H[np.arange(self.n), self.assignment] = 1.0
        return H

    def key(self) -> bytes:
        return self.assignment.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Partition(k={self.k}, n={self.n})"


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    # fsum is correctly rounded, so the result does not depend on term order
    return -math.fsum(p * np.log(p))


def variation_of_information(p, q) -> float:
    """VI(p, q) = H(p) + H(q) - 2 I(p; q), natural logarithms.

    Accepts :class:`Partition` objects or raw label arrays.
    """
    a = p.assignment if isinstance(p, Partition) else canonical_labels(p)
    b = q.assignment if isinstance(q, Partition) else canonical_labels(q)
    if len(a) != len(b):
        raise InputError(f"partitions cover different node counts ({len(a)} vs {len(b)})")
    n = len(a)
    if n == 0:
        return 0.0
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    joint = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb)
    h_joint = _entropy(joint.ravel(), n)
    h_a = _entropy(joint.sum(axis=1), n)
    h_b = _entropy(joint.sum(axis=0), n)
    # VI = 2 H(a,b) - H(a) - H(b)
    return max(0.0, 2.0 * h_joint - (h_a + h_b))


def mean_pairwise_vi(partitions, rng=None, max_pairs: int = 32640) -> float:
    """Average VI over all pairs of ``partitions``.

    When the number of pairs exceeds ``max_pairs`` a uniform sample of that
    many pairs is drawn from ``rng`` instead.
    """
    parts = list(partitions)
    m = len(parts)
    if m < 2:
        raise InputError("need at least two partitions")
    n_pairs = m * (m - 1) // 2
    if n_pairs <= max_pairs:
        # identical partitions contribute zero; group them to save work
        groups: dict[bytes, list] = {}
        for p in parts:
            groups.setdefault(p.key(), [p, 0])[1] += 1
        uniq = list(groups.values())
        total = 0.0
        for x in range(len(uniq)):
            for y in range(x + 1, len(uniq)):
                total += uniq[x][1] * uniq[y][1] * variation_of_information(uniq[x][0], uniq[y][0])
        return total / n_pairs
    if rng is None:
        raise InputError("an rng is required to sample pairs")
    iu, ju = np.triu_indices(m, k=1)
    pick = rng.choice(n_pairs, size=max_pairs, replace=False)
    return float(np.mean([variation_of_information(parts[iu[s]], parts[ju[s]]) for s in pick]))

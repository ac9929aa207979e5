"""Hierarchy of partitions linked by plurality voting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from .partition import Partition


@dataclass
class Dendrogram:
    """Partitions ordered coarse to fine, each community linked to a parent.

    ``parents[l][c]`` is the parent, at level ``l - 1``, of community ``c`` at
    level ``l``; level 0 is the all-in-one root and has no parents.
    ``annotations`` maps (level, community) to free-form data such as channel
    estimates.
    """

    levels: list[Partition]
    parents: list[dict[int, int]]
    labels: list[str] = field(default_factory=list)
    annotations: dict[tuple[int, int], dict] = field(default_factory=dict)

    def children(self, level: int, community: int) -> list[int]:
        return sorted(c for c, p in self.parents[level + 1].items() if p == community)

    def annotate(self, level: int, community: int, **data):
        self.annotations.setdefault((level, community), {}).update(data)

    def to_dict(self, nodes=None) -> dict:
        def members(p, c):
            idx = np.flatnonzero(p.assignment == c)
            return [nodes[i] for i in idx] if nodes is not None else [int(i) for i in idx]

        out = []
        for lvl, p in enumerate(self.levels):
            comms = []
            for c in range(p.k):
                comms.append({
                    "id": c,
                    "parent": self.parents[lvl].get(c),
                    "size": int(np.sum(p.assignment == c)),
                    "members": members(p, c),
                    "annotation": self.annotations.get((lvl, c), {}),
                })
            out.append({"level": lvl, "label": self.labels[lvl] if self.labels else str(lvl),
                        "k": p.k, "communities": comms})
        return {"levels": out}

    def to_json(self, nodes=None) -> str:
        return json.dumps(self.to_dict(nodes), indent=2, sort_keys=True, default=_jsonable) + "\n"

    def to_dot(self) -> str:
        lines = ["digraph dendrogram {", "  node [shape=box];"]
        for lvl, p in enumerate(self.levels):
            sizes = p.sizes()
            for c in range(p.k):
                ann = self.annotations.get((lvl, c), {})
                dom = ann.get("dominant", "")
                label = f"L{lvl}.{c}\\nn={int(sizes[c])}" + (f"\\n{dom}" if dom else "")
                style = ' style="dashed"' if dom == "none" else ""
                lines.append(f'  "L{lvl}.{c}" [label="{label}"{style}];')
        for lvl in range(1, len(self.levels)):
            for c, par in sorted(self.parents[lvl].items()):
                lines.append(f'  "L{lvl - 1}.{par}" -> "L{lvl}.{c}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x)}")


def plurality_parent(child_members: np.ndarray, parent: Partition) -> int:
    votes = np.bincount(parent.assignment[child_members], minlength=parent.k)
    return int(np.argmax(votes))  # argmax returns the lowest index on ties


def build_dendrogram(levels, labels=None) -> Dendrogram:
    """Link each community to the coarser community holding most of its nodes.

    ``levels`` are partitions ordered coarse to fine. An all-in-one root is
    prepended when the first level is not already one.
    """
    levels = list(levels)
    labels = list(labels) if labels is not None else [str(i) for i in range(len(levels))]
    if not levels:
        raise InputError("dendrogram needs at least one level")
    if any(p.n == 0 for p in levels):
        raise InputError("empty level in dendrogram")
    n = levels[0].n
    if any(p.n != n for p in levels):
        raise InputError("all dendrogram levels must cover the same nodes")
    if levels[0].k != 1:
        levels.insert(0, Partition.whole(n))
        labels.insert(0, "root")
    parents: list[dict[int, int]] = [{}]
    for coarse, fine in zip(levels, levels[1:]):
        links = {}
        for c, members in enumerate(fine.communities()):
            links[c] = plurality_parent(np.asarray(members), coarse)
        parents.append(links)
    return Dendrogram(levels, parents, labels)

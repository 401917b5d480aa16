"""Horizontal spreading of rewards onto unexplored sibling bins.

When a reward is backed up through a node, every sibling bin under the same
parent that has no real node yet (a *prospect*) receives the signed reward
scaled by ``(x**2 + 1) ** -k``, where ``x`` is its bin-index distance to the
visited node. Each prospect holds the weighted running mean of those
contributions (weight = the kernel value), so it stays inside [-1, 1].
Layers are independent: nothing crosses levels, and distance does not wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import core


def prospect_weight(x: int, k: float) -> float:
    if x < 0:
        raise ValueError(f"neighbour distance must be >= 0, got {x}")
    if not k > 0:
        raise ValueError(f"k must be > 0, got {k}")
    return math.pow(x * x + 1.0, -k)


class ProspectField:
    """Prospect accumulators for every non-root slot of a tree."""

    def __init__(self, size: int, k: float = 2.0):
        if not k > 0:
            raise ValueError(f"k must be > 0, got {k}")
        self.k = float(k)
        self.num = np.zeros(size)
        self.weight = np.zeros(size)

    def value(self, idx: int) -> float:
        w = self.weight[idx]
        return float(self.num[idx] / w) if w > 0 else 0.0

    def values(self) -> np.ndarray:
        out = np.zeros_like(self.num)
        np.divide(self.num, self.weight, out=out, where=self.weight > 0)
        return out

    def discard(self, idx) -> None:
        self.num[idx] = 0.0
        self.weight[idx] = 0.0


@dataclass
class ProspectLayer:
    """View of one tree level's prospects.

    ``values`` is indexed by the level's flat bin index (parent-major) and
    masked where a real node owns the bin.
    """

    tree: object
    level: int

    @property
    def k(self) -> float:
        return self.tree.prospects.k

    @property
    def _slice(self) -> slice:
        off = self.tree.offsets
        return slice(int(off[self.level]), int(off[self.level + 1]))

    @property
    def values(self) -> np.ma.MaskedArray:
        sl = self._slice
        vals = self.tree.prospects.values()[sl]
        return np.ma.masked_array(vals, mask=self.tree.expanded[sl].astype(bool))


def propagate_horizontal(layer: ProspectLayer, visited_bin: int, signed_delta: float) -> None:
    """Spread ``signed_delta`` from ``visited_bin`` onto its unexplored siblings."""
    if not -1.0 <= signed_delta <= 1.0:
        raise ValueError(f"signed_delta must lie in [-1, 1], got {signed_delta}")
    tree = layer.tree
    nb = int(tree.bins[layer.level - 1])
    size = int(tree.offsets[layer.level + 1] - tree.offsets[layer.level])
    if not 0 <= visited_bin < size:
        raise IndexError(f"bin {visited_bin} outside level {layer.level} (size {size})")
    group = (visited_bin // nb) * nb
    start = int(tree.offsets[layer.level]) + group
    f = tree.prospects
    core.spread(f.num, f.weight, tree.expanded, start, nb, visited_bin - group, float(signed_delta), f.k)


def signed_estimate(tree, idx: int) -> float:
    """Success estimate in [-1, 1] for the node or prospect at global slot ``idx``."""
    n = int(tree.n[idx])
    if n > 0:
        return 2.0 * (float(tree.q[idx]) / n) - 1.0
    return tree.prospects.value(idx)


def estimates(tree) -> np.ndarray:
    """``signed_estimate`` for every slot at once."""
    n = tree.n
    visited = n > 0
    mean = np.divide(tree.q, n, out=np.zeros_like(tree.q), where=visited)
    return np.where(visited, 2.0 * mean - 1.0, tree.prospects.values())

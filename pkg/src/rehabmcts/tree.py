"""Constant-depth Monte-Carlo tree over discretised joint-angle bins.

Every level has a fixed number of bins, so node storage is dense: level
``L`` holds ``prod(bins[:L])`` slots laid out parent-major, and a slot only
counts as a real node once it is expanded. The hot loops live in the
``_core`` kernels and operate on the flat arrays held here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._backend import core
from .prospects import ProspectField

SNAPSHOT_FORMAT = "rehabmcts-tree"
SNAPSHOT_VERSION = 1


class TreeError(Exception):
    pass


class UndefinedMeanError(TreeError, ZeroDivisionError):
    pass


@dataclass
class NodeStats:
    q_total: float = 0.0
    n_visits: int = 0


def mean_reward(stats: NodeStats) -> float:
    if stats.n_visits < 1:
        raise UndefinedMeanError("mean reward of an unvisited node is undefined")
    return stats.q_total / stats.n_visits


def uct_value(child: NodeStats, parent_n: int, cp: float) -> float:
    """Mean reward plus ``cp * sqrt(ln(parent_n) / n_child)``; +inf if unvisited."""
    if child.n_visits == 0:
        return math.inf
    return child.q_total / child.n_visits + cp * math.sqrt(math.log(max(parent_n, 1)) / child.n_visits)


@dataclass(frozen=True)
class SearchParams:
    cp: float = math.sqrt(2.0)
    visit_threshold: int = 1
    bins: tuple = (12, 8, 12, 6)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(int(b) for b in self.bins))
        if not self.cp >= 0:
            raise TreeError(f"cp must be >= 0, got {self.cp}")
        if self.visit_threshold < 0:
            raise TreeError(f"visit_threshold must be >= 0, got {self.visit_threshold}")
        if not self.bins or any(b < 2 for b in self.bins):
            raise TreeError(f"every level needs at least 2 bins, got {self.bins}")
        if len(self.bins) > 31:
            raise TreeError("tree depth is limited to 31 levels")
        if not 0 <= self.rng_seed < 2**64:
            raise TreeError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed}")


@dataclass(frozen=True, eq=False)
class TreeNode:
    """Handle on one slot of a :class:`Tree`."""

    tree: Tree = field(repr=False)
    level: int
    index: int  # global slot index

    @property
    def state_id(self) -> tuple[int, ...]:
        return self.tree.path_bins(self.index, self.level)

    @property
    def incoming_action(self) -> int | None:
        s = self.state_id
        return s[-1] if s else None

    @property
    def depth(self) -> int:
        return self.level

    @property
    def stats(self) -> NodeStats:
        return NodeStats(float(self.tree.q[self.index]), int(self.tree.n[self.index]))

    @property
    def is_leaf(self) -> bool:
        return self.level == self.tree.depth

    @property
    def expanded(self) -> bool:
        return bool(self.tree.expanded[self.index])

    @property
    def children(self) -> list[TreeNode]:
        """Real (expanded) children in bin order."""
        if self.is_leaf:
            return []
        start, count = self.tree.child_range(self.index, self.level)
        hits = np.flatnonzero(self.tree.expanded[start:start + count])
        return [TreeNode(self.tree, self.level + 1, start + int(i)) for i in hits]

    def child(self, b: int) -> TreeNode:
        start, count = self.tree.child_range(self.index, self.level)
        if not 0 <= b < count:
            raise TreeError(f"bin {b} outside 0..{count - 1} at level {self.level + 1}")
        return TreeNode(self.tree, self.level + 1, start + b)

    def __eq__(self, other):
        return isinstance(other, TreeNode) and other.tree is self.tree and other.index == self.index

    def __hash__(self):
        return hash((id(self.tree), self.index))


class Tree:
    def __init__(self, params: SearchParams = SearchParams(), k: float = 2.0):
        self.params = params
        self.bins = np.array(params.bins, dtype=np.int64)
        self.depth = len(params.bins)
        sizes = np.concatenate([[1], np.cumprod(self.bins)])
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        total = int(self.offsets[-1])
        self.q = np.zeros(total)
        self.n = np.zeros(total, dtype=np.int64)
        self.expanded = np.zeros(total, dtype=np.uint8)
        self.expanded[0] = 1
        self.prospects = ProspectField(total, k)
        self._scratch = np.zeros(int(self.bins.max()), dtype=np.int64)

    # -- layout -----------------------------------------------------------
    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    @property
    def n_leaves(self) -> int:
        return int(self.offsets[-1] - self.offsets[-2])

    @property
    def root(self) -> TreeNode:
        return TreeNode(self, 0, 0)

    def level_of(self, index: int) -> int:
        return int(np.searchsorted(self.offsets, index, side="right") - 1)

    def child_range(self, index: int, level: int) -> tuple[int, int]:
        nb = int(self.bins[level])
        return int(self.offsets[level + 1]) + (index - int(self.offsets[level])) * nb, nb

    def index_of(self, path_bins: Iterable[int]) -> int:
        local = 0
        level = 0
        for b in path_bins:
            nb = int(self.bins[level])
            if not 0 <= b < nb:
                raise TreeError(f"bin {b} outside 0..{nb - 1} at level {level + 1}")
            local = local * nb + int(b)
            level += 1
        return int(self.offsets[level]) + local

    def path_bins(self, index: int, level: int | None = None) -> tuple[int, ...]:
        if level is None:
            level = self.level_of(index)
        local = index - int(self.offsets[level])
        out = []
        for lv in range(level, 0, -1):
            local, b = divmod(local, int(self.bins[lv - 1]))
            out.append(b)
        return tuple(reversed(out))

    def node(self, path_bins: Iterable[int]) -> TreeNode:
        path_bins = tuple(path_bins)
        return TreeNode(self, len(path_bins), self.index_of(path_bins))

    def path_indices(self, leaf_bins: Iterable[int]) -> np.ndarray:
        """Global slot indices from root to the node addressed by ``leaf_bins``."""
        leaf_bins = tuple(leaf_bins)
        return np.array([self.index_of(leaf_bins[:i]) for i in range(len(leaf_bins) + 1)], dtype=np.int64)

    # -- search -----------------------------------------------------------
    def descend(self, uniforms, cp: float | None = None, threshold: int | None = None,
                expand: bool = True) -> np.ndarray:
        """Root-to-leaf slot indices chosen by best-child at each level.

        ``uniforms`` supplies one draw in [0, 1) per level for breaking ties
        and picking among under-visited children.
        """
        cp = self.params.cp if cp is None else cp
        threshold = self.params.visit_threshold if threshold is None else threshold
        path = np.empty(self.depth + 1, dtype=np.int64)
        core.descend(self.q, self.n, self.expanded, self.offsets, self.bins, float(cp),
                     int(threshold), np.asarray(uniforms, dtype=float), bool(expand),
                     path, self._scratch)
        return path

    def update(self, path: np.ndarray, delta: float, signed: float | None = None) -> None:
        """Back up ``delta`` along ``path``; optionally spread ``signed`` onto prospects."""
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {delta}")
        path = np.asarray(path, dtype=np.int64)
        fresh = path[self.expanded[path] == 0]
        self.expanded[path] = 1
        self.prospects.discard(fresh)
        core.backpropagate(self.q, self.n, path, float(delta))
        if signed is not None and len(path) == self.depth + 1:
            if not -1.0 <= signed <= 1.0:
                raise ValueError(f"signed reward must lie in [-1, 1], got {signed}")
            core.spread_path(self.prospects.num, self.prospects.weight, self.expanded,
                             self.offsets, self.bins, path, float(signed), self.prospects.k)

    # -- persistence ------------------------------------------------------
    def snapshot(self) -> str:
        p = self.params
        lines = [
            json.dumps({"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION}),
            json.dumps({"params": {"cp": p.cp, "visit_threshold": p.visit_threshold,
                                   "bins": list(p.bins), "rng_seed": p.rng_seed,
                                   "k": self.prospects.k}}),
        ]
        # lexicographic order of bin paths == depth-first preorder
        nodes = sorted((self.path_bins(int(i)), int(i)) for i in np.flatnonzero(self.expanded))
        for bins, i in nodes:
            lines.append(json.dumps({"node": list(bins), "q": float(self.q[i]), "n": int(self.n[i])}))
        pros = sorted((self.path_bins(int(i)), int(i)) for i in np.flatnonzero(self.prospects.weight))
        for bins, i in pros:
            lines.append(json.dumps({"prospect": list(bins), "num": float(self.prospects.num[i]),
                                     "weight": float(self.prospects.weight[i])}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str) -> Tree:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if len(rows) < 2 or rows[0].get("format") != SNAPSHOT_FORMAT:
            raise TreeError("not a tree snapshot")
        if rows[0].get("version") != SNAPSHOT_VERSION:
            raise TreeError(f"unsupported snapshot version {rows[0].get('version')}")
        pr = dict(rows[1]["params"])
        k = pr.pop("k")
        tree = cls(SearchParams(**pr), k=k)
        tree.expanded[0] = 0
        for row in rows[2:]:
            if "node" in row:
                i = tree.index_of(row["node"])
                tree.expanded[i] = 1
                tree.q[i] = row["q"]
                tree.n[i] = row["n"]
            elif "prospect" in row:
                i = tree.index_of(row["prospect"])
                tree.prospects.num[i] = row["num"]
                tree.prospects.weight[i] = row["weight"]
            else:
                raise TreeError(f"unknown snapshot record {row!r}")
        tree.expanded[0] = 1
        return tree

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.snapshot())

    @classmethod
    def load(cls, path) -> Tree:
        with open(path, encoding="utf-8") as fh:
            return cls.from_snapshot(fh.read())


def best_child(node: TreeNode, cp: float, threshold: int, rng: np.random.Generator) -> TreeNode:
    """Uniform pick among children under ``threshold`` visits, else UCT argmax.

    Children are all action bins of ``node``, expanded or not. Ties are
    broken uniformly at random.
    """
    tree = node.tree
    if node.is_leaf:
        raise TreeError("leaf nodes have no children")
    start, count = tree.child_range(node.index, node.level)
    m = core.child_candidates(tree.q, tree.n, start, count, int(tree.n[node.index]),
                              float(cp), int(threshold), tree._scratch)
    pick = min(int(rng.random() * m), m - 1)
    return TreeNode(tree, node.level + 1, start + int(tree._scratch[pick]))


def select_path(tree: Tree, rng: np.random.Generator, params: SearchParams | None = None) -> list[TreeNode]:
    """Descend from the root to a leaf, expanding the chosen child at each level."""
    params = params or tree.params
    path = tree.descend(rng.random(tree.depth), params.cp, params.visit_threshold)
    return [TreeNode(tree, lv, int(i)) for lv, i in enumerate(path)]


def backpropagate(path: list[TreeNode], delta: float) -> None:
    """Add one visit and ``delta`` reward to every node on ``path``."""
    if not path:
        return
    tree = path[0].tree
    tree.update(np.array([nd.index for nd in path], dtype=np.int64), delta)

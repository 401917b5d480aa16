"""UCT on a depth-one tree: a Bernoulli multi-armed bandit harness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import core
from .tree import SearchParams, Tree


@dataclass
class BanditResult:
    probs: np.ndarray
    pulls: np.ndarray
    means: np.ndarray  # empirical, NaN for unpulled arms
    choices: np.ndarray  # arm index per iteration

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def best_fraction(self) -> float:
        return float(self.pulls[self.best_arm] / max(self.pulls.sum(), 1))


def run_bandit(probs, iterations: int, cp: float = math.sqrt(2.0), threshold: int = 1,
               seed: int = 0) -> BanditResult:
    probs = np.asarray(probs, dtype=float)
    if len(probs) < 2:
        raise ValueError("need at least two arms")
    if ((probs < 0) | (probs > 1)).any():
        raise ValueError("arm probabilities must lie in [0, 1]")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    tree = Tree(SearchParams(cp=cp, visit_threshold=threshold, bins=(len(probs),), rng_seed=seed))
    rng = np.random.default_rng(seed)
    draws = rng.random((iterations, 2))
    choices = np.empty(iterations, dtype=np.int64)
    path = np.empty(2, dtype=np.int64)
    q, n, exp, off, bins = tree.q, tree.n, tree.expanded, tree.offsets, tree.bins
    scratch = tree._scratch
    for t in range(iterations):
        core.descend(q, n, exp, off, bins, cp, threshold, draws[t, :1], True, path, scratch)
        arm = int(path[1]) - 1
        core.backpropagate(q, n, path, 1.0 if draws[t, 1] < probs[arm] else 0.0)
        choices[t] = arm
    pulls = n[1:].copy()
    means = np.divide(q[1:], pulls, out=np.full(len(probs), np.nan), where=pulls > 0)
    return BanditResult(probs, pulls, means, choices)

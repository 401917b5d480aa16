"""Choosing where the next fruit appears.

The spawner looks for the leaf path whose success estimate is closest to
zero, i.e. where the player is neither reliably succeeding nor reliably
failing. Path ambiguity is the mean of ``|signed_estimate|`` over the
levels of the path, using real node statistics where they exist and
prospects elsewhere.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ._backend import core
from .kinematics import JOINT_LIMITS, JOINTS, ArmSegments, JointAngles, ReachLimit, fk_points
from .prospects import estimates
from .tree import Tree, TreeError

log = logging.getLogger(__name__)


class SpawnConfigError(ValueError):
    pass


def bin_midpoints(joint: str, count: int) -> np.ndarray:
    lo, hi = JOINT_LIMITS[joint]
    width = (hi - lo) / count
    return lo + width * (np.arange(count) + 0.5)


def path_angles(path_bins, bins) -> JointAngles:
    if len(path_bins) != 4 or len(bins) != 4:
        raise TreeError("spawn paths address exactly four joints")
    vals = []
    for joint, b, nb in zip(JOINTS, path_bins, bins):
        if not 0 <= b < nb:
            raise TreeError(f"{joint} bin {b} outside 0..{nb - 1}")
        vals.append(float(bin_midpoints(joint, nb)[b]))
    return JointAngles(*vals)


def spawn_position(path_bins, bins=(12, 8, 12, 6), segs: ArmSegments = ArmSegments()) -> np.ndarray:
    """Fingertip position for the bin-midpoint angles of ``path_bins``."""
    a = path_angles(tuple(path_bins), tuple(bins))
    return fk_points(*a.as_tuple(), segs=segs)[2]


class Workspace:
    """Fingertip target and feasibility for every leaf of a 4-level grid."""

    def __init__(self, bins=(12, 8, 12, 6), segs: ArmSegments = ArmSegments(),
                 reach_limit: ReachLimit | None = None):
        bins = tuple(int(b) for b in bins)
        if len(bins) != 4:
            raise SpawnConfigError(f"the arm grid has four levels, got {len(bins)}")
        reach_limit = reach_limit or ReachLimit.for_segments(segs)
        reach_limit.validate(segs)
        self.bins = bins
        self.segs = segs
        self.reach_limit = reach_limit
        mids = [bin_midpoints(j, nb) for j, nb in zip(JOINTS, bins)]
        grid = np.meshgrid(*mids, indexing="ij")
        p4 = fk_points(*grid, segs=segs)[2]
        self.targets = p4.reshape(-1, 3)
        self.distances = np.linalg.norm(self.targets, axis=1)
        self.feasible = (self.distances <= reach_limit.t_path_mm + 1e-9).astype(np.uint8)
        self.feasible_leaves = np.flatnonzero(self.feasible)
        if not len(self.feasible_leaves):
            raise SpawnConfigError(
                f"no leaf lies within t_path_mm={reach_limit.t_path_mm}; raise the reach limit"
            )

    def leaf_bins(self, leaf: int) -> tuple[int, int, int, int]:
        return tuple(int(b) for b in np.unravel_index(leaf, self.bins))


@dataclass(frozen=True)
class SpawnPolicyConfig:
    epsilon: float = 0.1
    decision_budget_ms: float = 10.0
    reach_limit: ReachLimit = field(default_factory=ReachLimit)

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise SpawnConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.decision_budget_ms > 0:
            raise SpawnConfigError(f"decision_budget_ms must be > 0, got {self.decision_budget_ms}")


@dataclass(frozen=True)
class SpawnDecision:
    path_bins: tuple[int, int, int, int]
    target_mm: tuple[float, float, float]
    ambiguity: float
    fruit_id: str
    spawn_time: float  # session clock, ms
    leaf: int = -1


def path_ambiguity(tree: Tree, leaf: int, est: np.ndarray | None = None) -> float:
    """Mean |estimate| over the levels of one leaf path (same op order as the scan)."""
    est = estimates(tree) if est is None else est
    idx = tree.path_indices(np.unravel_index(leaf, tuple(int(b) for b in tree.bins)))
    acc = abs(float(est[idx[1]]))
    for i in idx[2:]:
        acc = acc + abs(float(est[i]))
    return acc / tree.depth


def choose_spawn_path(tree: Tree, workspace: Workspace, cfg: SpawnPolicyConfig,
                      rng: np.random.Generator, fruit_id: str = "", spawn_time: float = 0.0) -> SpawnDecision:
    """Pick the next fruit's leaf path.

    With probability ``cfg.epsilon`` a uniformly random feasible leaf is
    returned; otherwise the feasible leaf of minimum path ambiguity, ties
    broken uniformly.
    """
    if tuple(int(b) for b in tree.bins) != workspace.bins:
        raise SpawnConfigError(f"tree bins {tuple(tree.bins)} do not match workspace {workspace.bins}")
    t0 = time.perf_counter()
    est = estimates(tree)
    if rng.random() < cfg.epsilon:
        leaf = int(workspace.feasible_leaves[rng.integers(len(workspace.feasible_leaves))])
        amb = path_ambiguity(tree, leaf, est)
    else:
        out = np.empty(tree.n_leaves, dtype=np.int64)
        m, amb = core.min_ambiguity(est, tree.offsets, tree.bins, workspace.feasible, out)
        if m == 0:
            raise SpawnConfigError("no feasible leaf")
        leaf = int(out[rng.integers(m)]) if m > 1 else int(out[0])
    elapsed_ms = (time.perf_counter() - t0) * 1e3
    if elapsed_ms > cfg.decision_budget_ms:
        log.warning("spawn decision took %.2f ms (budget %.2f ms)", elapsed_ms, cfg.decision_budget_ms)
    target = workspace.targets[leaf]
    return SpawnDecision(
        path_bins=workspace.leaf_bins(leaf),
        target_mm=tuple(float(v) for v in target),
        ambiguity=float(amb),
        fruit_id=fruit_id,
        spawn_time=float(spawn_time),
        leaf=leaf,
    )


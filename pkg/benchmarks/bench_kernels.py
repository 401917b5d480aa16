"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case is timed with ``timeit`` (best of ``--repeat``) on both backends
and the speed-up is printed. Cases that differ only in kernel dispatch run
the same inputs on both sides.
"""

import argparse
import math
import timeit

import numpy as np

from rehabmcts import _backend, bandit, prospects, spawner, tree
from rehabmcts.player import PlayerModel, run_session
from rehabmcts.session import EngineConfig
from rehabmcts.spawner import SpawnPolicyConfig, Workspace, choose_spawn_path
from rehabmcts.tree import Tree

KERNEL_USERS = (tree, prospects, spawner, bandit)


def use(core):
    for mod in KERNEL_USERS:
        mod.core = core


def warm_tree(n=500, seed=0):
    t = Tree()
    rng = np.random.default_rng(seed)
    for _ in range(n):
        path = t.descend(rng.random(t.depth), math.sqrt(2.0), 1)
        s = float(rng.uniform(-1, 1))
        t.update(path, (s + 1) / 2, s)
    return t


def cases(core):
    t = warm_tree()
    u = np.random.default_rng(1).random((1000, t.depth))
    path = np.empty(t.depth + 1, dtype=np.int64)
    est = prospects.estimates(t)
    feas = np.ones(t.n_leaves, dtype=np.uint8)
    out = np.empty(t.n_leaves, dtype=np.int64)
    ws = Workspace()
    rng = np.random.default_rng(2)
    cfg = SpawnPolicyConfig(epsilon=0.0)

    def descend_backprop():
        for row in u:
            core.descend(t.q, t.n, t.expanded, t.offsets, t.bins, 1.4, 1, row, False, path, t._scratch)
            core.backpropagate(t.q, t.n, path, 0.5)

    def spread():
        for _ in range(1000):
            core.spread_path(t.prospects.num, t.prospects.weight, t.expanded, t.offsets, t.bins, path, 0.3, 2.0)

    def scan():
        core.min_ambiguity(est, t.offsets, t.bins, feas, out)

    return {
        "descend+backprop x1000": (descend_backprop, 1),
        "spread_path x1000": (spread, 1),
        "min_ambiguity (6912 leaves)": (scan, 100),
        "choose_spawn_path": (lambda: choose_spawn_path(t, ws, cfg, rng), 100),
        "bandit 10 arms x20000": (lambda: bandit.run_bandit(np.linspace(0.1, 0.9, 10), 20_000, seed=0), 1),
        "200-fruit session": (lambda: run_session(EngineConfig(), PlayerModel(), 200, seed=0), 1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _backend.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the Python kernels are available")
    timings = {}
    for name, core in backends.items():
        use(core)
        for label, (fn, number) in cases(core).items():
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            timings.setdefault(label, {})[name] = best
    use(backends[_backend.BACKEND])
    print(f"{'case':30s} {'python':>12s} {'compiled':>12s} {'speed-up':>9s}")
    for label, t in timings.items():
        py, cc = t.get("python"), t.get("compiled")
        ratio = f"{py / cc:8.1f}x" if py and cc else "      n/a"
        fmt = lambda v: f"{v * 1e3:10.3f}ms" if v is not None else f"{'-':>12s}"
        print(f"{label:30s} {fmt(py)} {fmt(cc)} {ratio}")


if __name__ == "__main__":
    main()

"""Pure-Python/numpy twin of the compiled ``_core`` kernels.

Every function keeps the same signature and the same floating-point
operation order as its compiled counterpart.
"""

import math

import numpy as np


def child_candidates(q, n, start, count, parent_n, cp, threshold, out):
    ns = n[start:start + count].tolist()
    m = 0
    for i, ni in enumerate(ns):
        if ni < threshold:
            out[m] = i
            m += 1
    if m:
        return m
    qs = q[start:start + count].tolist()
    lnp = math.log(parent_n if parent_n > 1 else 1)
    best = -math.inf
    for i, (qi, ni) in enumerate(zip(qs, ns)):
        v = math.inf if ni == 0 else qi / ni + cp * math.sqrt(lnp / ni)
        if v > best:
            best = v
            m = 0
        if v == best:
            out[m] = i
            m += 1
    return m


def descend(q, n, expanded, offsets, bins, cp, threshold, uniforms, expand, path, scratch):
    node = 0
    path[0] = 0
    for level in range(len(bins)):
        nb = int(bins[level])
        start = int(offsets[level + 1]) + (node - int(offsets[level])) * nb
        m = child_candidates(q, n, start, nb, int(n[node]), cp, threshold, scratch)
        pick = min(int(uniforms[level] * m), m - 1)
        child = start + int(scratch[pick])
        if expand:
            expanded[child] = 1
        path[level + 1] = child
        node = child


def backpropagate(q, n, path, delta):
    n[path] += 1
    q[path] += delta


def spread(pnum, pw, expanded, start, count, visited, delta, k):
    # scalar libm pow keeps results bit-identical with the compiled kernel
    for i, e in enumerate(expanded[start:start + count].tolist()):
        if i == visited or e:
            continue
        x = abs(i - visited)
        w = math.pow(x * x + 1.0, -k)
        pnum[start + i] += w * (w * delta)
        pw[start + i] += w


def spread_path(pnum, pw, expanded, offsets, bins, path, delta, k):
    for level in range(len(bins)):
        nb = int(bins[level])
        parent, child = int(path[level]), int(path[level + 1])
        start = int(offsets[level + 1]) + (parent - int(offsets[level])) * nb
        spread(pnum, pw, expanded, start, nb, child - start, delta, k)


def min_ambiguity(est, offsets, bins, feasible, out):
    depth = len(bins)
    acc = np.abs(est[offsets[1]:offsets[2]])
    for level in range(2, depth + 1):
        acc = np.repeat(acc, bins[level - 1]) + np.abs(est[offsets[level]:offsets[level + 1]])
    acc = acc / depth
    acc = np.where(np.asarray(feasible, dtype=bool), acc, np.inf)
    best = acc.min()
    if not np.isfinite(best):
        return 0, math.inf
    hits = np.flatnonzero(acc == best)
    out[:len(hits)] = hits
    return len(hits), float(best)

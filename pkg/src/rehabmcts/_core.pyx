# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for tree search, prospect spreading and spawn scans.

Mirrors ``_core_py`` exactly, including floating-point operation order, so
that both backends produce bit-identical trees for the same seed.
"""

from cpython.mem cimport PyMem_Free, PyMem_Malloc
from libc.math cimport log, sqrt, pow, fabs, INFINITY


cdef Py_ssize_t _candidates(const double[:] q, const long long[:] n,
                            Py_ssize_t start, Py_ssize_t count,
                            long long parent_n, double cp, long long threshold,
                            long long[:] out):
    cdef Py_ssize_t i, m = 0
    cdef double best = -INFINITY, v, lnp
    for i in range(count):
        if n[start + i] < threshold:
            out[m] = i
            m += 1
    if m > 0:
        return m
    lnp = log(<double>(parent_n if parent_n > 1 else 1))
    for i in range(count):
        if n[start + i] == 0:
            v = INFINITY
        else:
            v = q[start + i] / n[start + i] + cp * sqrt(lnp / n[start + i])
        if v > best:
            best = v
            m = 0
        if v == best:
            out[m] = i
            m += 1
    return m


def child_candidates(const double[:] q, const long long[:] n, Py_ssize_t start,
                     Py_ssize_t count, long long parent_n, double cp,
                     long long threshold, long long[:] out):
    return _candidates(q, n, start, count, parent_n, cp, threshold, out)


def descend(const double[:] q, const long long[:] n, unsigned char[:] expanded,
            const long long[:] offsets, const long long[:] bins, double cp,
            long long threshold, const double[:] uniforms, bint expand,
            long long[:] path, long long[:] scratch):
    cdef Py_ssize_t level, depth = bins.shape[0], node = 0, start, m, pick, child
    path[0] = 0
    for level in range(depth):
        start = offsets[level + 1] + (node - offsets[level]) * bins[level]
        m = _candidates(q, n, start, bins[level], n[node], cp, threshold, scratch)
        pick = <Py_ssize_t>(uniforms[level] * m)
        if pick >= m:
            pick = m - 1
        child = start + scratch[pick]
        if expand:
            expanded[child] = 1
        path[level + 1] = child
        node = child


def backpropagate(double[:] q, long long[:] n, const long long[:] path, double delta):
    cdef Py_ssize_t i
    for i in range(path.shape[0]):
        n[path[i]] += 1
        q[path[i]] += delta


cdef void _spread(double[:] pnum, double[:] pw, const unsigned char[:] expanded,
                  Py_ssize_t start, Py_ssize_t count, Py_ssize_t visited,
                  double delta, double k):
    cdef Py_ssize_t i, x
    cdef double w
    for i in range(count):
        if i == visited or expanded[start + i]:
            continue
        x = i - visited if i > visited else visited - i
        w = pow(<double>(x * x) + 1.0, -k)
        pnum[start + i] += w * (w * delta)
        pw[start + i] += w


def spread(double[:] pnum, double[:] pw, const unsigned char[:] expanded,
           Py_ssize_t start, Py_ssize_t count, Py_ssize_t visited,
           double delta, double k):
    _spread(pnum, pw, expanded, start, count, visited, delta, k)


def spread_path(double[:] pnum, double[:] pw, const unsigned char[:] expanded,
                const long long[:] offsets, const long long[:] bins,
                const long long[:] path, double delta, double k):
    cdef Py_ssize_t level, parent, child, start
    for level in range(bins.shape[0]):
        parent = path[level]
        child = path[level + 1]
        start = offsets[level + 1] + (parent - offsets[level]) * bins[level]
        _spread(pnum, pw, expanded, start, bins[level], child - start, delta, k)


def min_ambiguity(const double[:] est, const long long[:] offsets,
                  const long long[:] bins, const unsigned char[:] feasible,
                  long long[:] out):
    """Mean |estimate| over the levels of every feasible leaf path.

    Writes the indices of all minimising leaves to ``out`` and returns
    ``(count, minimum)``.
    """
    cdef Py_ssize_t depth = bins.shape[0], nleaves = feasible.shape[0]
    cdef Py_ssize_t level, j, b, nb, size, off, m = 0
    cdef double base, acc, best = INFINITY
    cdef double *buf = <double *> PyMem_Malloc(nleaves * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        size = bins[0]
        off = offsets[1]
        for j in range(size):
            buf[j] = fabs(est[off + j])
        # prefix sums level by level, in place from the back (children sit at j*nb + b >= j)
        for level in range(2, depth + 1):
            nb = bins[level - 1]
            off = offsets[level]
            for j in range(size - 1, -1, -1):
                base = buf[j]
                for b in range(nb - 1, -1, -1):
                    buf[j * nb + b] = base + fabs(est[off + j * nb + b])
            size = size * nb
        for j in range(nleaves):
            if not feasible[j]:
                continue
            acc = buf[j] / depth
            if acc < best:
                best = acc
                m = 0
            if acc == best:
                out[m] = j
                m += 1
    finally:
        PyMem_Free(buf)
    return m, best

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-iteration kernels; signatures mirror ``_kernels_py``."""

from libc.math cimport sqrt, log

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _lip(const double[:] lip, Py_ssize_t i):
    return lip[0] if lip.shape[0] == 1 else lip[i]


def fd_gradients(center, probes, double nu):
    if nu <= 0:
        raise ValueError("probe radius must be positive")
    cdef const double[:] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef const double[:, :] p = np.ascontiguousarray(probes, dtype=np.float64)
    cdef Py_ssize_t d = p.shape[0], k = p.shape[1], i, j
    out = np.empty((k, d), dtype=np.float64)
    cdef double[:, :] o = out
    for i in range(k):
        for j in range(d):
            o[i, j] = (p[j, i] - c[i]) / nu
    return out


def barrier_value(double f0, cons, double eta):
    cdef const double[:] v = np.ascontiguousarray(cons, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(v.shape[0]):
        if v[i] >= 0:
            raise ValueError("barrier undefined: constraint value >= 0")
        acc += log(-v[i])
    return f0 - eta * acc


def barrier_direction(grads, cons, double eta):
    cdef const double[:, :] G = np.ascontiguousarray(grads, dtype=np.float64)
    cdef const double[:] v = np.ascontiguousarray(cons, dtype=np.float64)
    cdef Py_ssize_t d = G.shape[1], m = v.shape[0], i, j
    out = np.empty(d, dtype=np.float64)
    cdef double[:] g = out
    cdef double w
    for j in range(d):
        g[j] = G[0, j]
    for i in range(m):
        if v[i] >= 0:
            raise ValueError("barrier undefined: constraint value >= 0")
        w = eta / (-v[i])
        for j in range(d):
            g[j] += w * G[i + 1, j]
    return out


cdef double _smooth(const double[:] v, double eta, double M,
                    const double[:] lip) except? -1.0:
    cdef Py_ssize_t i
    cdef double s, li, acc = M
    for i in range(v.shape[0]):
        if v[i] >= 0:
            raise ValueError("local smoothness undefined: constraint value >= 0")
        s = -v[i]
        li = _lip(lip, i)
        acc += 2.0 * eta * M / s + 4.0 * eta * li * li / (s * s)
    return acc


cdef double _slack(const double[:] v, const double[:] lip, double L):
    cdef Py_ssize_t i
    cdef double s, best = 1e308
    for i in range(v.shape[0]):
        s = -v[i] * (L / _lip(lip, i))
        if s < best:
            best = s
    return best


cdef double _step(double slack, double L, double gnorm, double L2) except? -1.0:
    if slack <= 0 or L2 <= 0:
        raise ValueError("slack and local smoothness must be positive")
    cdef double inv = 1.0 / L2, a
    if gnorm == 0.0:
        return inv
    a = slack / (2.0 * L * gnorm)
    return a if a < inv else inv


def local_smoothness(cons, double eta, double M, lip):
    cdef const double[:] v = np.ascontiguousarray(cons, dtype=np.float64)
    cdef const double[:] lp = np.ascontiguousarray(np.atleast_1d(lip), dtype=np.float64)
    return _smooth(v, eta, M, lp)


def effective_slack(cons, lip, double L):
    cdef const double[:] v = np.ascontiguousarray(cons, dtype=np.float64)
    cdef const double[:] lp = np.ascontiguousarray(np.atleast_1d(lip), dtype=np.float64)
    return _slack(v, lp, L)


def probe_radius(double eta, Py_ssize_t d, double M, double L, Py_ssize_t m,
                 double slack, double factor=1.0):
    if slack <= 0:
        raise ValueError("slack must be positive to place safe probes")
    cdef double sd = sqrt(<double>d)
    cdef double a = eta / (sd * M)
    cdef double den = m * sd * M
    if L > den:
        den = L
    cdef double b = slack / (factor * den)
    return a if a < b else b


def step_size(double slack, double L, double gnorm, double L2):
    return _step(slack, L, gnorm, L2)


def barrier_step(x, center, probes, cons, double nu, double eta, double M,
                 double L, lip):
    if nu <= 0:
        raise ValueError("probe radius must be positive")
    cdef const double[:] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef const double[:, :] p = np.ascontiguousarray(probes, dtype=np.float64)
    cdef const double[:] v = np.ascontiguousarray(cons, dtype=np.float64)
    cdef const double[:] lp = np.ascontiguousarray(np.atleast_1d(lip), dtype=np.float64)
    cdef Py_ssize_t d = p.shape[0], m = v.shape[0], i, j
    g_arr = np.empty(d, dtype=np.float64)
    xn_arr = np.empty(d, dtype=np.float64)
    cdef double[:] g = g_arr
    cdef double[:] xn = xn_arr
    cdef double w, gnorm = 0.0, L2, slack, gamma

    for j in range(d):
        g[j] = (p[j, 0] - c[0]) / nu
    for i in range(m):
        if v[i] >= 0:
            raise ValueError("barrier undefined: constraint value >= 0")
        w = eta / (-v[i])
        for j in range(d):
            g[j] += w * (p[j, i + 1] - c[i + 1]) / nu
    for j in range(d):
        gnorm += g[j] * g[j]
    gnorm = sqrt(gnorm)

    L2 = _smooth(v, eta, M, lp)
    slack = _slack(v, lp, L)
    gamma = _step(slack, L, gnorm, L2)
    for j in range(d):
        xn[j] = xv[j] - gamma * g[j]
    return g_arr, gnorm, L2, gamma, slack, xn_arr

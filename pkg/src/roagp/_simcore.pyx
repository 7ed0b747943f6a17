# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 core for the perturbed swing equations.

Hot loop of the whole pipeline: one call integrates n_steps fixed RK4 steps
and records every state.  Mirrors _simpure.simulate_swing exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sin, isfinite

cnp.import_array()

COMPILED = True


cdef void _deriv(double[:] inertia, double[:] damping,
                 double[:] winv, double[:] ts,
                 Py_ssize_t[:] sa, Py_ssize_t[:] sb,
                 double[:] x, double[:] acc, double[:] out) noexcept:
    cdef Py_ssize_t m = inertia.shape[0]
    cdef Py_ssize_t nb = winv.shape[0]
    cdef Py_ssize_t i, b
    cdef double pa, pb, flow
    for i in range(m):
        acc[i] = 0.0
    for b in range(nb):
        pa = x[sa[b]] if sa[b] >= 0 else 0.0
        pb = x[sb[b]] if sb[b] >= 0 else 0.0
        flow = winv[b] * (sin(ts[b]) - sin(ts[b] + pa - pb))
        if sa[b] >= 0:
            acc[sa[b]] += flow
        if sb[b] >= 0:
            acc[sb[b]] -= flow
    for i in range(m):
        out[i] = x[m + i]
        out[m + i] = (acc[i] - damping[i] * x[m + i]) / inertia[i]


def simulate_swing(double[:] inertia, double[:] damping,
                   double[:] winv, double[:] ts,
                   Py_ssize_t[:] sa, Py_ssize_t[:] sb,
                   double[:] x0, double dt, Py_ssize_t n_steps, double blowup):
    """Integrate and record; returns (states, n_recorded, truncated)."""
    cdef Py_ssize_t m = inertia.shape[0]
    cdef Py_ssize_t dim = 2 * m
    states_arr = np.empty((n_steps + 1, dim))
    cdef double[:, :] states = states_arr
    cdef double[:] x = np.array(x0, dtype=np.float64)
    cdef double[:] acc = np.empty(m)
    cdef double[:] k1 = np.empty(dim)
    cdef double[:] k2 = np.empty(dim)
    cdef double[:] k3 = np.empty(dim)
    cdef double[:] k4 = np.empty(dim)
    cdef double[:] xt = np.empty(dim)
    cdef Py_ssize_t i, j
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef double nrm2
    cdef double blow2 = blowup * blowup
    cdef bint bad

    for j in range(dim):
        states[0, j] = x[j]
    for i in range(1, n_steps + 1):
        _deriv(inertia, damping, winv, ts, sa, sb, x, acc, k1)
        for j in range(dim):
            xt[j] = x[j] + half * k1[j]
        _deriv(inertia, damping, winv, ts, sa, sb, xt, acc, k2)
        for j in range(dim):
            xt[j] = x[j] + half * k2[j]
        _deriv(inertia, damping, winv, ts, sa, sb, xt, acc, k3)
        for j in range(dim):
            xt[j] = x[j] + dt * k3[j]
        _deriv(inertia, damping, winv, ts, sa, sb, xt, acc, k4)
        nrm2 = 0.0
        bad = False
        for j in range(dim):
            x[j] = x[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            nrm2 += x[j] * x[j]
            if not isfinite(x[j]):
                bad = True
        if bad or nrm2 > blow2:
            return states_arr, i, True
        for j in range(dim):
            states[i, j] = x[j]
    return states_arr, n_steps + 1, False

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fixed-step integrator; contract identical to ``_stepper_py``."""

from libc.math cimport sin

import numpy as np

BACKEND = "cython"


cdef inline void _matvec(double[:, ::1] a, double[::1] v, double[::1] out,
                         Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(rows):
        s = 0.0
        for j in range(cols):
            s += a[i, j] * v[j]
        out[i] = s


cdef inline void _matvec_add(double[:, ::1] a, double[::1] v, double[::1] out,
                             Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(rows):
        s = 0.0
        for j in range(cols):
            s += a[i, j] * v[j]
        out[i] += s


cdef void _deriv(double t, double[::1] x,
                 double[:, ::1] a_mat, double[:, ::1] b_mat,
                 double[:, ::1] amp, double[:, ::1] omg, double[:, ::1] phs,
                 double[:, ::1] pa, double[:, ::1] qa,
                 double[:, ::1] pb, double[:, ::1] qb,
                 Py_ssize_t[::1] ia, Py_ssize_t[::1] ib,
                 double[::1] d, double[::1] av, double[::1] bv,
                 double[::1] dx, double[::1] dacc) noexcept nogil:
    cdef Py_ssize_t nx = x.shape[0]
    cdef Py_ssize_t nd = amp.shape[0]
    cdef Py_ssize_t ns = amp.shape[1]
    cdef Py_ssize_t na = pa.shape[0]
    cdef Py_ssize_t nb = pb.shape[0]
    cdef Py_ssize_t nacc = dacc.shape[0]
    cdef Py_ssize_t c, k, r
    cdef double s

    for c in range(nd):
        s = 0.0
        for k in range(ns):
            s += amp[c, k] * sin(omg[c, k] * t + phs[c, k])
        d[c] = s

    _matvec(a_mat, x, dx, nx, nx)
    if nd > 0:
        _matvec_add(b_mat, d, dx, nx, nd)

    _matvec(pa, x, av, na, nx)
    _matvec(pb, x, bv, nb, nx)
    if nd > 0:
        _matvec_add(qa, d, av, na, nd)
        _matvec_add(qb, d, bv, nb, nd)

    for r in range(nacc):
        dacc[r] = av[ia[r]] * bv[ib[r]]


def rk4_collect(double[::1] x, double[::1] acc, double t_start,
                Py_ssize_t n_steps, double dt,
                double[:, ::1] a_mat, double[:, ::1] b_mat,
                double[:, ::1] amp, double[:, ::1] omg, double[:, ::1] phs,
                double[:, ::1] pa, double[:, ::1] qa,
                double[:, ::1] pb, double[:, ::1] qb,
                Py_ssize_t[::1] ia, Py_ssize_t[::1] ib):
    cdef Py_ssize_t nx = x.shape[0]
    cdef Py_ssize_t nacc = acc.shape[0]
    cdef Py_ssize_t nd = amp.shape[0]
    cdef Py_ssize_t na = pa.shape[0]
    cdef Py_ssize_t nb = pb.shape[0]
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef Py_ssize_t step, i
    cdef double t

    work = np.empty(3 * nx + 2 * nacc + max(nd, 1) + na + nb, dtype=np.float64)
    cdef Py_ssize_t off = 0
    cdef double[::1] dx = work[off:off + nx]
    off += nx
    cdef double[::1] xs = work[off:off + nx]
    off += nx
    cdef double[::1] sumx = work[off:off + nx]
    off += nx
    cdef double[::1] dacc = work[off:off + nacc]
    off += nacc
    cdef double[::1] suma = work[off:off + nacc]
    off += nacc
    cdef double[::1] d = work[off:off + max(nd, 1)]
    off += max(nd, 1)
    cdef double[::1] av = work[off:off + na]
    off += na
    cdef double[::1] bv = work[off:off + nb]

    with nogil:
        for step in range(n_steps):
            t = t_start + step * dt

            _deriv(t, x, a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb,
                   ia, ib, d, av, bv, dx, dacc)
            for i in range(nx):
                sumx[i] = dx[i]
                xs[i] = x[i] + half * dx[i]
            for i in range(nacc):
                suma[i] = dacc[i]

            _deriv(t + half, xs, a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb,
                   ia, ib, d, av, bv, dx, dacc)
            for i in range(nx):
                sumx[i] += 2.0 * dx[i]
                xs[i] = x[i] + half * dx[i]
            for i in range(nacc):
                suma[i] += 2.0 * dacc[i]

            _deriv(t + half, xs, a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb,
                   ia, ib, d, av, bv, dx, dacc)
            for i in range(nx):
                sumx[i] += 2.0 * dx[i]
                xs[i] = x[i] + dt * dx[i]
            for i in range(nacc):
                suma[i] += 2.0 * dacc[i]

            _deriv(t + dt, xs, a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb,
                   ia, ib, d, av, bv, dx, dacc)
            for i in range(nx):
                x[i] += sixth * (sumx[i] + dx[i])
            for i in range(nacc):
                acc[i] += sixth * (suma[i] + dacc[i])

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Crank-Nicolson march, Thomas solver and bilinear interpolation.

Same contracts as ``_fallback``; see that module for the operator layout.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


cdef void _thomas_factor(double[::1] l, double[::1] d, double[::1] u,
                         double[::1] cp, double[::1] inv) noexcept nogil:
    # cp[i] = modified upper diagonal, inv[i] = 1 / pivot
    cdef Py_ssize_t n = d.shape[0], i
    cdef double piv
    inv[0] = 1.0 / d[0]
    cp[0] = u[0] * inv[0]
    for i in range(1, n):
        piv = d[i] - l[i] * cp[i - 1]
        inv[i] = 1.0 / piv
        cp[i] = u[i] * inv[i] if i < n - 1 else 0.0


cdef void _thomas_apply(double[::1] l, double[::1] cp, double[::1] inv,
                        double[::1] rhs, double[::1] x) noexcept nogil:
    cdef Py_ssize_t n = rhs.shape[0], i
    x[0] = rhs[0] * inv[0]
    for i in range(1, n):
        x[i] = (rhs[i] - l[i] * x[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]


def tridiag_solve(lower, diag, upper, rhs):
    cdef double[::1] l = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    cp = np.empty(n)
    inv = np.empty(n)
    x = np.empty(n)
    _thomas_factor(l, d, u, cp, inv)
    _thomas_apply(l, cp, inv, r, x)
    return x


cdef void _bands(double[::1] lo, double[::1] di, double[::1] up, double dt,
                 double[::1] l, double[::1] d, double[::1] u) noexcept nogil:
    cdef Py_ssize_t m = d.shape[0], i
    cdef double h = 0.5 * dt
    for i in range(m):
        l[i] = -h * lo[i + 1]
        d[i] = 1.0 - h * di[i + 1]
        u[i] = -h * up[i + 1]
    d[0] += 2.0 * l[0]
    u[0] -= l[0]
    d[m - 1] += 2.0 * u[m - 1]
    l[m - 1] -= u[m - 1]


cdef void _step(double[::1] lo, double[::1] di, double[::1] up, double[::1] src,
                double[::1] uold, double dt, double[::1] l, double[::1] cp,
                double[::1] inv, double[::1] rhs, double[::1] x,
                double[::1] unew) noexcept nogil:
    cdef Py_ssize_t m = rhs.shape[0], i
    cdef double h = 0.5 * dt
    for i in range(m):
        rhs[i] = uold[i + 1] + h * (lo[i + 1] * uold[i] + di[i + 1] * uold[i + 1]
                                    + up[i + 1] * uold[i + 2]) + dt * src[i + 1]
    _thomas_apply(l, cp, inv, rhs, x)
    for i in range(m):
        unew[i + 1] = x[i]
    unew[0] = 2.0 * x[0] - x[1]
    unew[m + 1] = 2.0 * x[m - 1] - x[m - 2]


def _prepare(lo, di, up, double dt):
    cdef double[::1] lo_ = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] di_ = np.ascontiguousarray(di, dtype=np.float64)
    cdef double[::1] up_ = np.ascontiguousarray(up, dtype=np.float64)
    cdef Py_ssize_t m = di_.shape[0] - 2
    l = np.empty(m)
    d = np.empty(m)
    u = np.empty(m)
    cp = np.empty(m)
    inv = np.empty(m)
    _bands(lo_, di_, up_, dt, l, d, u)
    _thomas_factor(l, d, u, cp, inv)
    return lo_, di_, up_, l, cp, inv


def cn_step(lo, di, up, src, u_old, double dt):
    lo_, di_, up_, l, cp, inv = _prepare(lo, di, up, dt)
    cdef double[::1] s = np.ascontiguousarray(src, dtype=np.float64)
    cdef double[::1] uo = np.ascontiguousarray(u_old, dtype=np.float64)
    cdef Py_ssize_t n = uo.shape[0]
    rhs = np.empty(n - 2)
    x = np.empty(n - 2)
    out = np.empty(n)
    _step(lo_, di_, up_, s, uo, dt, l, cp, inv, rhs, x, out)
    return out


def cn_march(lo, di, up, src, u_T, double dt, Py_ssize_t n_t):
    lo_, di_, up_, l, cp, inv = _prepare(lo, di, up, dt)
    cdef double[::1] s = np.ascontiguousarray(src, dtype=np.float64)
    cdef double[::1] uT = np.ascontiguousarray(u_T, dtype=np.float64)
    cdef Py_ssize_t n = uT.shape[0], k, i
    # time-major scratch keeps each level contiguous
    cdef double[:, ::1] work = np.empty((n_t, n))
    cdef double[::1] rhs = np.empty(n - 2)
    cdef double[::1] x = np.empty(n - 2)
    cdef double[::1] l_ = l, cp_ = cp, inv_ = inv
    for i in range(n):
        work[n_t - 1, i] = uT[i]
    with nogil:
        for k in range(n_t - 2, -1, -1):
            _step(lo_, di_, up_, s, work[k + 1], dt, l_, cp_, inv_, rhs, x, work[k])
    return np.asarray(work).T.copy()


def bilinear(fields, double z0, double dz, double t0, double dt, zq, tq):
    cdef double[:, :, ::1] f = np.ascontiguousarray(fields, dtype=np.float64)
    zb, tb = np.broadcast_arrays(np.asarray(zq, dtype=np.float64), np.asarray(tq, dtype=np.float64))
    shape = zb.shape
    cdef double[::1] z = np.ascontiguousarray(zb.ravel())
    cdef double[::1] t = np.ascontiguousarray(tb.ravel())
    cdef Py_ssize_t k = f.shape[0], nz = f.shape[1], nt = f.shape[2]
    cdef Py_ssize_t n = z.shape[0], p, q, i, j
    out = np.empty((k, n))
    cdef double[:, ::1] o = out
    cdef double sz, st, wz, wt
    with nogil:
        for p in range(n):
            sz = (z[p] - z0) / dz
            st = (t[p] - t0) / dt
            i = <Py_ssize_t>floor(sz)
            j = <Py_ssize_t>floor(st)
            if i < 0:
                i = 0
            elif i > nz - 2:
                i = nz - 2
            if j < 0:
                j = 0
            elif j > nt - 2:
                j = nt - 2
            wz = sz - i
            wt = st - j
            for q in range(k):
                o[q, p] = ((1 - wz) * (1 - wt) * f[q, i, j] + wz * (1 - wt) * f[q, i + 1, j]
                           + (1 - wz) * wt * f[q, i, j + 1] + wz * wt * f[q, i + 1, j + 1])
    return out.reshape((k,) + shape)

"""Numpy/scipy implementations of the hot kernels.

Operator convention shared with the compiled core: on interior nodes
``1..n-2`` the spatial operator is

    (A u)_i = lo[i] u[i-1] + di[i] u[i] + up[i] u[i+1]

and the two boundary nodes are tied to the interior by linear
extrapolation (zero second derivative). Time runs backward from the
terminal column.
"""
import numpy as np
from scipy.linalg import solve_banded


def tridiag_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, np.asarray(rhs, dtype=float))


def _implicit_bands(lo, di, up, dt):
    """Banded form of (I - dt/2 A) on interior nodes after boundary elimination."""
    h = 0.5 * dt
    l = -h * lo[1:-1].copy()
    d = 1.0 - h * di[1:-1].copy()
    u = -h * up[1:-1].copy()
    # u[0] = 2 u[1] - u[2]
    d[0] += 2.0 * l[0]
    u[0] -= l[0]
    # u[n-1] = 2 u[n-2] - u[n-3]
    d[-1] += 2.0 * u[-1]
    l[-1] -= u[-1]
    m = d.size
    ab = np.zeros((3, m))
    ab[0, 1:] = u[:-1]
    ab[1] = d
    ab[2, :-1] = l[1:]
    return ab


def _explicit(lo, di, up, u_old, dt):
    h = 0.5 * dt
    return u_old[1:-1] + h * (lo[1:-1] * u_old[:-2] + di[1:-1] * u_old[1:-1] + up[1:-1] * u_old[2:])


def _close_boundaries(v):
    n = v.size + 2
    out = np.empty(n)
    out[1:-1] = v
    out[0] = 2.0 * v[0] - v[1]
    out[-1] = 2.0 * v[-1] - v[-2]
    return out


def cn_step(lo, di, up, src, u_old, dt):
    """One Crank-Nicolson step backward in time with a frozen source."""
    ab = _implicit_bands(lo, di, up, dt)
    rhs = _explicit(lo, di, up, u_old, dt) + dt * src[1:-1]
    return _close_boundaries(solve_banded((1, 1), ab, rhs))


def cn_march(lo, di, up, src, u_T, dt, n_t):
    """March from the terminal column to t=0; returns array (n_z, n_t)."""
    lo, di, up, src, u_T = (np.ascontiguousarray(x, dtype=float) for x in (lo, di, up, src, u_T))
    n_z = u_T.size
    out = np.empty((n_z, n_t))
    out[:, n_t - 1] = u_T
    ab = _implicit_bands(lo, di, up, dt)
    u = u_T
    for k in range(n_t - 2, -1, -1):
        rhs = _explicit(lo, di, up, u, dt) + dt * src[1:-1]
        u = _close_boundaries(solve_banded((1, 1), ab, rhs, check_finite=False))
        out[:, k] = u
    return out


def bilinear(fields, z0, dz, t0, dt, zq, tq):
    """Bilinear interpolation of stacked node fields ``(k, n_z, n_t)``.

    Query points are assumed inside the grid (callers clamp or reject).
    """
    fields = np.asarray(fields, dtype=float)
    _, n_z, n_t = fields.shape
    zq = np.asarray(zq, dtype=float)
    tq = np.asarray(tq, dtype=float)
    sz = (zq - z0) / dz
    st = (tq - t0) / dt
    i = np.clip(np.floor(sz).astype(np.intp), 0, n_z - 2)
    j = np.clip(np.floor(st).astype(np.intp), 0, n_t - 2)
    wz = sz - i
    wt = st - j
    f00 = fields[:, i, j]
    f10 = fields[:, i + 1, j]
    f01 = fields[:, i, j + 1]
    f11 = fields[:, i + 1, j + 1]
    return ((1 - wz) * (1 - wt)) * f00 + (wz * (1 - wt)) * f10 + ((1 - wz) * wt) * f01 + (wz * wt) * f11

"""Classical mean-variance comparison and the reciprocal H equation.

The return-like process

    R_t = exp( int zeta (mu - r) - 1/2 zeta^2 sigma^2 ds + int zeta sigma dW1 )

carries the loading zeta(z, t) of the monotone strategy. Its first two
moments give the Lagrange multiplier gamma*(A), the optimal target A* and
the risk aversion theta at which the classical and monotone strategies
share an intercept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateER, DegenerateVariance, ExcessiveExcursion, GridTooCoarse
from .pde import _broadcast, _shifted_drift, operator_bands
from .sim import EXCURSION_LIMIT
from .strategy import loading
from .streams import chunk_ranges, mean_se, path_normals

ER_TOL = 1e-10
VAR_TOL = 1e-14

__all__ = [
    "MeanVarianceSolution", "RMoments", "simulate_R", "bs_closed_form", "lagrange_gamma",
    "optimal_A", "mv_strategy", "theta_equivalence", "solve_H_and_check_duality",
    "mean_variance_solution", "phi_second_moment",
]


@dataclass(frozen=True)
class RMoments:
    ER: float
    ER2: float
    VarR: float
    se_ER: float
    se_ER2: float
    se_VarR: float
    excursions: int = 0

    def __iter__(self):
        return iter((self.ER, self.ER2, self.VarR, (self.se_ER, self.se_ER2, self.se_VarR)))


@dataclass(frozen=True)
class MeanVarianceSolution:
    ER: float
    ER2: float
    VarR: float
    gamma_star: float
    A_star: float
    theta: float
    phi_second_moment: float
    strategy_intercept: float


def bs_closed_form(lam, horizon_T):
    """(ER, ER2, VarR) for a constant market price of risk."""
    e = math.exp(-lam * lam * horizon_T)
    return e, e, e - e * e


def simulate_R(model, sol, z0, cfg, t0=0.0):
    """Monte Carlo moments of R_T started at (z0, t0) under P.

    Z follows Euler-Maruyama; log R is accumulated exactly along the
    discrete path, so R stays positive.
    """
    T = model.horizon_T
    if not t0 < T:
        raise ValueError("t0 must be before the horizon")
    ds = (T - t0) / cfg.n_steps
    sq = math.sqrt(ds)
    g = sol.grid
    rho, rb = model.rho, model.rho_bar
    R = np.empty(cfg.n_paths)
    exc = 0
    pos = 0
    for start, stop in chunk_ranges(cfg.n_base):
        xi = path_normals(cfg, start, stop, 2)
        n = xi.shape[2]
        Z = np.full(n, float(z0))
        logR = np.zeros(n)
        for k in range(cfg.n_steps):
            t = t0 + k * ds
            exc += int(np.count_nonzero((Z < g.z_lo) | (Z > g.z_hi)))
            zc = np.clip(Z, g.z_lo, g.z_hi)
            (G, Gz), _ = sol.interp_clamped(zc, t, fields=2)
            zeta = loading(model, zc, G, Gz)
            sig = np.asarray(model.sigma(zc), dtype=float)
            mr = np.asarray(model.mu(zc), dtype=float) - model.r
            d1, d2 = sq * xi[k, 0], sq * xi[k, 1]
            logR += (zeta * mr - 0.5 * zeta * zeta * sig * sig) * ds + zeta * sig * d1
            Z = Z + np.asarray(model.a(zc), dtype=float) * ds \
                + np.asarray(model.b(zc), dtype=float) * (rho * d1 + rb * d2)
        R[pos:pos + n] = np.exp(logR)
        pos += n
    if exc > EXCURSION_LIMIT * cfg.n_paths * cfg.n_steps:
        raise ExcessiveExcursion(f"{exc} path-steps left the grid domain")
    return _moments(R, cfg, exc)


def _pairs_chunked(v, cfg):
    """Antithetic pair averages for the chunk layout [base..., mirrors...] per chunk."""
    if not cfg.antithetic:
        return v
    out, pos = [], 0
    for start, stop in chunk_ranges(cfg.n_base):
        m = stop - start
        out.append(0.5 * (v[pos:pos + m] + v[pos + m:pos + 2 * m]))
        pos += 2 * m
    return np.concatenate(out)


def _moments(R, cfg, exc=0):
    r1 = _pairs_chunked(R, cfg)
    r2 = _pairs_chunked(R * R, cfg)
    ER, se1 = mean_se(r1)
    ER2, se2 = mean_se(r2)
    # delta method for ER2 - ER^2
    _, sev = mean_se(r2 - 2.0 * ER * r1)
    return RMoments(ER, ER2, ER2 - ER * ER, se1, se2, sev, exc)


def lagrange_gamma(A, x, ER):
    """Multiplier gamma*(A) = (A - x) ER / (1 - ER)."""
    if abs(1.0 - ER) <= ER_TOL:
        raise DegenerateER("E R_T = 1: variance cannot be traded against the mean")
    return (A - x) * ER / (1.0 - ER)


def _check_var(VarR):
    if not VarR > VAR_TOL:
        raise DegenerateVariance("Var R_T is zero; the mean-variance problem is degenerate")


def phi_second_moment(ER, VarR):
    """E phi_T^2 = Var R_T / (1 - E R_T)^2."""
    if abs(1.0 - ER) <= ER_TOL:
        raise DegenerateER("E R_T = 1")
    return VarR / (1.0 - ER) ** 2


def optimal_A(x, theta, ER, VarR):
    """Optimal target A* and gamma*(A*) for risk aversion theta."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    _check_var(VarR)
    A = x + (1.0 / (2.0 * theta)) * (1.0 - ER) ** 2 / VarR
    gamma = (1.0 / (2.0 * theta)) * (1.0 - ER) * ER / VarR
    return A, gamma


def mv_strategy(sol, model, x, z, t, x0, z0, theta, ER, VarR):
    """Classical mean-variance portfolio (x - x0 - (1/2 theta)(1 - ER)/VarR) zeta(z, t).

    ``z0`` is the factor level at which ER and VarR were computed; it is
    only checked against the grid.
    """
    _check_var(VarR)
    if not theta > 0:
        raise ValueError("theta must be positive")
    sol.interp(z0, 0.0, fields=1)
    G, Gz = sol.interp(z, t, fields=2)
    k = np.asarray(x, dtype=float) - x0 - (1.0 - ER) / (2.0 * theta * VarR)
    out = k * loading(model, z, G, Gz)
    return float(out) if np.ndim(out) == 0 else out


def theta_equivalence(sol, anchor, ER, VarR):
    """Risk aversion at which the classical intercept equals the monotone one.

    Solves (1/2 theta)(1 - ER)/VarR = -2 y0 G(z0, t0) for theta.
    """
    if abs(1.0 - ER) <= ER_TOL:
        raise DegenerateER("E R_T = 1")
    _check_var(VarR)
    G0 = float(sol.interp(anchor.z0, anchor.t0, fields=1)[0])
    theta = (1.0 - ER) / (4.0 * anchor.y0 * abs(G0) * VarR)
    if not theta > 0:
        raise DegenerateER("E R_T > 1 gives a negative risk aversion")
    return theta


def mean_variance_solution(sol, anchor, theta, moments):
    ER, ER2, VarR = moments.ER, moments.ER2, moments.VarR
    A, gamma = optimal_A(anchor.x0, theta, ER, VarR)
    return MeanVarianceSolution(
        ER=ER, ER2=ER2, VarR=VarR, gamma_star=gamma, A_star=A, theta=theta,
        phi_second_moment=phi_second_moment(ER, VarR),
        strategy_intercept=anchor.x0 + (1.0 - ER) / (2.0 * theta * VarR),
    )


def solve_H_and_check_duality(model, grid, sol=None):
    """Solve the reciprocal equation for H and compare G H + 1 on interior nodes.

    The quadratic term -rho^2 b^2 H_z^2 / H is lagged one time level and
    enters each Crank-Nicolson step as a frozen source.
    Returns ``(H, max |G H + 1|)``; pass ``sol`` to reuse an existing G.
    """
    from .pde import solve

    z = grid.z
    n = grid.n_z
    dt = grid.dt(model.horizon_T)
    drift = _broadcast(_shifted_drift(model, z), n)
    half_diff = 0.5 * _broadcast(model.b(z), n) ** 2
    lam2 = _broadcast(model.lam(z), n) ** 2
    lo, di, up = operator_bands(drift, half_diff, -lam2, grid.dz)
    c = model.rho ** 2 * 2.0 * half_diff
    H = np.empty((n, grid.n_t))
    u = np.ones(n)
    H[:, -1] = u
    for k in range(grid.n_t - 2, -1, -1):
        Hz = np.gradient(u, grid.dz)
        u = _kernels.cn_step(lo, di, up, -c * Hz * Hz / u, u, dt)
        if not np.all(np.isfinite(u)) or np.any(u <= 0):
            raise GridTooCoarse("H lost positivity or finiteness")
        H[:, k] = u
    if sol is None:
        sol = solve(model, grid)
    err = float(np.max(np.abs(sol.G[1:-1] * H[1:-1] + 1.0)))
    return H, err

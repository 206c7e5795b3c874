"""Finite-difference solution of the value equation for G.

G solves

    G_t + (a - 2 rho b lam) G_z + 1/2 b^2 G_zz - rho_bar^2 b^2 G_z^2 / G + lam^2 G = 0,
    G(z, T) = -1,

which is linearised in two ways. Away from rho^2 = 1/2, ``G = -F1**alpha``
with ``alpha = 1/(2 rho^2 - 1)`` and F1 solves a linear equation with
potential ``(2 rho^2 - 1) lam^2``. At rho^2 = 1/2, ``G = -exp(F2)`` and F2
solves a linear equation with source ``lam^2``. Both linear problems share
the drift ``a - 2 rho b lam`` and are marched backward with Crank-Nicolson.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import _kernels
from .errors import GridTooCoarse, NonPositiveF, OutOfDomain

CASE_SWITCH_TOL = 1e-6
DEFAULT_RESIDUAL_TOL = 1e-2


@dataclass(frozen=True)
class GridSpec:
    z_lo: float
    z_hi: float
    n_z: int
    n_t: int

    def __post_init__(self):
        if not self.z_lo < self.z_hi:
            raise ValueError("grid needs z_lo < z_hi")
        # both boundary nodes are eliminated against two interior neighbours
        if self.n_z < 4:
            raise ValueError("grid needs n_z >= 4")
        if self.n_t < 2:
            raise ValueError("grid needs n_t >= 2")

    @property
    def dz(self):
        return (self.z_hi - self.z_lo) / (self.n_z - 1)

    @property
    def z(self):
        return np.linspace(self.z_lo, self.z_hi, self.n_z)

    def dt(self, horizon_T):
        return horizon_T / (self.n_t - 1)

    def times(self, horizon_T):
        return np.linspace(0.0, horizon_T, self.n_t)


def default_grid(model, n_z=401, n_t=401, width=6.0):
    """Grid spanning the factor's stationary mean +/- ``width`` standard deviations.

    Only meaningful for the OU family; other models get ``[-width, width]``.
    """
    fam = model.family
    if fam is not None and fam.kind == "ou_tanh":
        p = fam.params
        sd = p["beta"] / math.sqrt(2.0 * p["kappa"])
        return GridSpec(p["m"] - width * sd, p["m"] + width * sd, n_z, n_t)
    return GridSpec(-width, width, n_z, n_t)


@dataclass(frozen=True)
class CaseTag:
    kind: str  # "I" or "II"
    alpha: Optional[float] = None

    def __str__(self):
        return f"CaseI(alpha={self.alpha:.17g})" if self.kind == "I" else "CaseII"


def case_for(rho, tol=CASE_SWITCH_TOL):
    e = 2.0 * rho * rho - 1.0
    if abs(e) > tol:
        return CaseTag("I", 1.0 / e)
    return CaseTag("II")


def operator_bands(drift, half_diff, reaction, dz):
    """Tridiagonal coefficients of ``drift u_z + half_diff u_zz + reaction u``.

    The first-order term is centred unless the cell Peclet number exceeds 2,
    in which case it is upwinded node by node.
    """
    drift = np.asarray(drift, dtype=float)
    q = np.asarray(half_diff, dtype=float) / (dz * dz)
    k = np.asarray(reaction, dtype=float)
    lo = q - drift / (2 * dz)
    di = -2.0 * q + k
    up = q + drift / (2 * dz)
    with np.errstate(divide="ignore", invalid="ignore"):
        peclet = np.abs(drift) * dz / np.asarray(half_diff, dtype=float)
    fwd = (peclet > 2.0) & (drift > 0)
    bwd = (peclet > 2.0) & (drift < 0)
    lo = np.where(fwd, q, np.where(bwd, q - drift / dz, lo))
    di = np.where(fwd, -2.0 * q - drift / dz + k, np.where(bwd, -2.0 * q + drift / dz + k, di))
    up = np.where(fwd, q + drift / dz, np.where(bwd, q, up))
    return lo, di, up


def _shifted_drift(model, z):
    return np.asarray(model.a(z), dtype=float) - 2.0 * model.rho * np.asarray(model.b(z)) * model.lam(z)


def _broadcast(v, n):
    return np.asarray(v, dtype=float) * np.ones(n)


def linear_residual(F, drift, half_diff, reaction, source, dz, dt):
    """Centred residual of the linear backward equation on interior nodes."""
    out = np.full(F.shape, np.nan)
    if F.shape[1] < 3:
        return out
    Ft = (F[1:-1, 2:] - F[1:-1, :-2]) / (2 * dt)
    Fz = (F[2:, 1:-1] - F[:-2, 1:-1]) / (2 * dz)
    Fzz = (F[2:, 1:-1] - 2 * F[1:-1, 1:-1] + F[:-2, 1:-1]) / (dz * dz)
    c = drift[1:-1, None]
    q = half_diff[1:-1, None]
    k = reaction[1:-1, None]
    s = source[1:-1, None]
    out[1:-1, 1:-1] = Ft + c * Fz + q * Fzz + k * F[1:-1, 1:-1] + s
    return out


def _solve_linear(model, grid, reaction, source, terminal, residual_tol):
    z = grid.z
    n = grid.n_z
    dt = grid.dt(model.horizon_T)
    drift = _broadcast(_shifted_drift(model, z), n)
    half_diff = 0.5 * _broadcast(model.b(z), n) ** 2
    reaction = _broadcast(reaction, n)
    source = _broadcast(source, n)
    lo, di, up = operator_bands(drift, half_diff, reaction, grid.dz)
    F = _kernels.cn_march(lo, di, up, source, _broadcast(terminal, n), dt, grid.n_t)
    if not np.all(np.isfinite(F)):
        raise GridTooCoarse("non-finite values in the linear solve")
    if residual_tol is not None:
        res = linear_residual(F, drift, half_diff, reaction, source, grid.dz, dt)
        scale = max(1.0, float(np.max(np.abs(F))))
        worst = float(np.nanmax(np.abs(res))) / scale if np.any(np.isfinite(res)) else 0.0
        if worst > residual_tol:
            raise GridTooCoarse(f"diagnostic residual {worst:.3e} exceeds {residual_tol:.1e}")
    return F


def solve_case1(model, grid, residual_tol=DEFAULT_RESIDUAL_TOL):
    """Linear solution F1 (terminal value 1, potential (2 rho^2 - 1) lam^2)."""
    e = 2.0 * model.rho ** 2 - 1.0
    if abs(e) <= CASE_SWITCH_TOL:
        raise ValueError("rho^2 is within the case-switch tolerance of 1/2; use solve_case2")
    lam = model.lam(grid.z)
    F = _solve_linear(model, grid, e * lam * lam, 0.0, 1.0, residual_tol)
    if np.any(F <= 0):
        raise NonPositiveF("F1 <= 0 somewhere; widen the domain or refine the time step")
    return F


def solve_case2(model, grid, residual_tol=DEFAULT_RESIDUAL_TOL):
    """Linear solution F2 (terminal value 0, source lam^2)."""
    if abs(2.0 * model.rho ** 2 - 1.0) > CASE_SWITCH_TOL:
        raise ValueError("Case II requires rho^2 = 1/2 within the case-switch tolerance")
    lam = model.lam(grid.z)
    return _solve_linear(model, grid, 0.0, lam * lam, 0.0, residual_tol)


@dataclass(frozen=True)
class PdeSolution:
    grid: GridSpec
    G: np.ndarray
    G_z: np.ndarray
    case_tag: CaseTag
    F: np.ndarray
    horizon_T: float

    @property
    def z(self):
        return self.grid.z

    @property
    def times(self):
        return self.grid.times(self.horizon_T)

    @property
    def dt(self):
        return self.grid.dt(self.horizon_T)

    @cached_property
    def G_t(self):
        return np.gradient(self.G, self.dt, axis=1, edge_order=2) if self.grid.n_t > 2 else \
            np.gradient(self.G, self.dt, axis=1)

    @cached_property
    def G_zz(self):
        return np.gradient(self.G_z, self.grid.dz, axis=0)

    @cached_property
    def _stack(self):
        return np.ascontiguousarray(np.stack([self.G, self.G_z, self.G_t, self.G_zz]))

    def _check(self, z, t):
        g = self.grid
        eps = 1e-12 * max(1.0, abs(g.z_lo), abs(g.z_hi), self.horizon_T)
        z = np.asarray(z, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(z < g.z_lo - eps) or np.any(z > g.z_hi + eps) or np.any(t < -eps) \
                or np.any(t > self.horizon_T + eps):
            raise OutOfDomain("(z, t) outside the solved grid")

    def interp(self, z, t, fields=4):
        """Interpolate (G, G_z, G_t, G_zz)[:fields] at points inside the grid."""
        self._check(z, t)
        g = self.grid
        return _kernels.bilinear(self._stack[:fields], g.z_lo, g.dz, 0.0, self.dt, z, t)

    def interp_clamped(self, z, t, fields=4):
        """As :meth:`interp` but clamps z to the grid; returns (values, n_outside)."""
        g = self.grid
        z = np.asarray(z, dtype=float)
        outside = int(np.count_nonzero((z < g.z_lo) | (z > g.z_hi)))
        zc = np.clip(z, g.z_lo, g.z_hi)
        tc = np.clip(np.asarray(t, dtype=float), 0.0, self.horizon_T)
        return _kernels.bilinear(self._stack[:fields], g.z_lo, g.dz, 0.0, self.dt, zc, tc), outside


def assemble_G(F, case_tag, model, grid):
    """Map a linear solution to G and its z-derivative."""
    F = np.asarray(F, dtype=float)
    if case_tag.kind == "I":
        if np.any(F <= 0):
            raise NonPositiveF("F1 <= 0 somewhere")
        G = -np.exp(case_tag.alpha * np.log(F))
    else:
        G = -np.exp(F)
    G_z = np.gradient(G, grid.dz, axis=0)
    if not np.all(G[:, -1] == -1.0):
        raise AssertionError("terminal row of G is not exactly -1")
    return PdeSolution(grid=grid, G=G, G_z=G_z, case_tag=case_tag, F=F, horizon_T=model.horizon_T)


def solve(model, grid, residual_tol=DEFAULT_RESIDUAL_TOL, case_tag=None):
    """Pick the case from rho, solve the linear problem and assemble G."""
    tag = case_tag or case_for(model.rho)
    if tag.kind == "I":
        F = solve_case1(model, grid, residual_tol)
    else:
        F = solve_case2(model, grid, residual_tol)
    return assemble_G(F, tag, model, grid)


def eval_G(sol, z, t):
    """Bilinear interpolation of (G, G_z) at (z, t)."""
    G, Gz = sol.interp(z, t, fields=2)
    if np.ndim(G) == 0:
        return float(G), float(Gz)
    return G, Gz


@dataclass(frozen=True)
class ResidualField:
    values: np.ndarray  # NaN off the interior
    max_norm: float


def residual_resulting_equation(sol, model):
    """Finite-difference residual of the nonlinear G equation on interior nodes."""
    G = sol.G
    dz, dt = sol.grid.dz, sol.dt
    z = sol.z
    n = z.size
    out = np.full(G.shape, np.nan)
    if G.shape[1] >= 3:
        drift = _broadcast(_shifted_drift(model, z), n)[1:-1, None]
        b2 = _broadcast(model.b(z), n)[1:-1, None] ** 2
        lam2 = _broadcast(model.lam(z), n)[1:-1, None] ** 2
        Gc = G[1:-1, 1:-1]
        Gt = (G[1:-1, 2:] - G[1:-1, :-2]) / (2 * dt)
        Gz = (G[2:, 1:-1] - G[:-2, 1:-1]) / (2 * dz)
        Gzz = (G[2:, 1:-1] - 2 * Gc + G[:-2, 1:-1]) / (dz * dz)
        rb2 = model.rho_bar ** 2
        out[1:-1, 1:-1] = Gt + drift * Gz + 0.5 * b2 * Gzz - rb2 * b2 * Gz * Gz / Gc + lam2 * Gc
    finite = np.isfinite(out)
    norm = float(np.max(np.abs(out[finite]))) if finite.any() else 0.0
    return ResidualField(out, norm)

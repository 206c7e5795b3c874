"""Monte Carlo Feynman-Kac estimators for the linear solutions F1 and F2.

Both are expectations over the auxiliary diffusion

    dZ~ = (a - 2 rho b lam)(Z~) ds + b(Z~) dW,   Z~_t = z,

simulated by Euler-Maruyama with left-endpoint quadrature of the path
integral of ``lam^2``.

Euler's weak error is first order, and with antithetic pairing the
standard error at desk-scale path counts is far below that bias. The
estimators therefore default to Richardson extrapolation ``2 f(fine) -
f(coarse)``, where the coarse path uses every other step driven by the
summed fine increments. Pass ``richardson=False`` for plain Euler.
"""
from __future__ import annotations

import math

import numpy as np

from .streams import McConfig, chunk_ranges, mean_se, path_normals

__all__ = ["McConfig", "simulate_Z_tilde", "lambda2_integrals", "estimate_F1", "estimate_F2",
           "estimate_F"]


def _drift(model, z):
    return np.asarray(model.a(z), dtype=float) - 2.0 * model.rho * np.asarray(model.b(z)) * model.lam(z)


def _check(model, t):
    if not t < model.horizon_T:
        raise ValueError("start time must be before the horizon")


def _euler_step(model, Z, ds, dW):
    return Z + _drift(model, Z) * ds + np.asarray(model.b(Z)) * dW


def simulate_Z_tilde(model, z, t, cfg):
    """Euler-Maruyama trajectories of Z~ on [t, T]; array ``(n_paths, n_steps + 1)``.

    With antithetic sampling rows ``2q`` and ``2q + 1`` are mirror images.
    """
    _check(model, t)
    ds = (model.horizon_T - t) / cfg.n_steps
    sq = math.sqrt(ds)
    out = []
    for start, stop in chunk_ranges(cfg.n_base):
        xi = path_normals(cfg, start, stop, 1)[:, 0, :]
        paths = np.empty((xi.shape[1], cfg.n_steps + 1))
        Z = np.full(xi.shape[1], float(z))
        paths[:, 0] = Z
        for k in range(cfg.n_steps):
            Z = _euler_step(model, Z, ds, sq * xi[k])
            paths[:, k + 1] = Z
        if cfg.antithetic:
            m = paths.shape[0] // 2
            paths = np.stack([paths[:m], paths[m:]], axis=1).reshape(-1, cfg.n_steps + 1)
        out.append(paths)
    return np.concatenate(out, axis=0)


def lambda2_integrals(model, z, t, cfg, order="forward", coarse=False):
    """Per-path left-endpoint integrals of lam^2 along Z~.

    Returns ``(fine, coarse_or_None)``, each shaped ``(2, n_pairs)`` under
    antithetic sampling (row 1 holds the mirrors) and ``(1, n_paths)``
    otherwise. ``coarse=True`` also integrates the half-resolution path
    built from the same noise.
    """
    _check(model, t)
    if coarse and cfg.n_steps % 2:
        raise ValueError("the coarse companion path needs an even n_steps")
    ds = (model.horizon_T - t) / cfg.n_steps
    sq = math.sqrt(ds)
    rows = 2 if cfg.antithetic else 1
    fine = np.empty((rows, cfg.n_base))
    crs = np.empty((rows, cfg.n_base)) if coarse else None
    for start, stop in chunk_ranges(cfg.n_base, order):
        xi = path_normals(cfg, start, stop, 1)[:, 0, :]
        Z = np.full(xi.shape[1], float(z))
        acc = np.zeros(xi.shape[1])
        if coarse:
            Zc = Z.copy()
            accc = np.zeros(xi.shape[1])
        for k in range(cfg.n_steps):
            lam = model.lam(Z)
            acc += lam * lam * ds
            dW = sq * xi[k]
            Z = _euler_step(model, Z, ds, dW)
            if coarse:
                if k % 2 == 0:
                    dWc = dW
                else:
                    lc = model.lam(Zc)
                    accc += lc * lc * (2 * ds)
                    Zc = _euler_step(model, Zc, 2 * ds, dWc + dW)
        fine[:, start:stop] = acc.reshape(rows, stop - start)
        if coarse:
            crs[:, start:stop] = accc.reshape(rows, stop - start)
    return fine, crs


def _estimate(model, z, t, cfg, fn, richardson, order):
    fine, crs = lambda2_integrals(model, z, t, cfg, order, coarse=richardson)
    vals = fn(fine)
    if richardson:
        vals = 2.0 * vals - fn(crs)
    samples = vals.mean(axis=0) if cfg.antithetic else vals[0]
    return mean_se(samples)


def estimate_F1(model, z, t, cfg, richardson=True, order="forward"):
    """Mean and standard error of exp((2 rho^2 - 1) * int lam^2(Z~) ds)."""
    e = 2.0 * model.rho ** 2 - 1.0
    return _estimate(model, z, t, cfg, lambda v: np.exp(e * v), richardson, order)


def estimate_F2(model, z, t, cfg, richardson=True, order="forward"):
    """Mean and standard error of int lam^2(Z~) ds."""
    return _estimate(model, z, t, cfg, lambda v: v, richardson, order)


def estimate_F(model, z, t, cfg, richardson=True):
    """Estimate whichever linear solution the PDE solver uses for ``model.rho``."""
    from .pde import case_for

    if case_for(model.rho).kind == "I":
        return estimate_F1(model, z, t, cfg, richardson)
    return estimate_F2(model, z, t, cfg, richardson)

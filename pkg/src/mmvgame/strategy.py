"""Saddle-point feedback controls built on a solved value surface.

All evaluations read G and G_z by interpolation from a
:class:`~mmvgame.pde.PdeSolution`; nothing is re-solved here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Anchor:
    """Initial condition fixing the reduced (wealth-feedback) strategy."""

    x0: float
    y0: float
    z0: float
    t0: float = 0.0


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def loading(model, z, G, Gz):
    """zeta = -(lam/sigma - rho b/sigma * G_z/G), from pre-interpolated G, G_z."""
    sig = np.asarray(model.sigma(z), dtype=float)
    b = np.asarray(model.b(z), dtype=float)
    return -(model.lam(z) / sig - model.rho * b / sig * (Gz / G))


def eta_star(model, z, G, Gz):
    lam = model.lam(z)
    eta2 = -model.rho_bar * np.asarray(model.b(z), dtype=float) * (Gz / G)
    return -lam, eta2


@dataclass(frozen=True)
class ControlFields:
    sol: object
    model: object
    anchor: Anchor

    def __post_init__(self):
        a = self.anchor
        if a.y0 <= 0:
            raise ValueError("anchor y0 must be positive")
        if not 0.0 <= a.t0 < self.model.horizon_T:
            raise ValueError("anchor t0 must lie in [0, T)")
        if not self.G_anchor < 0:
            raise ValueError("G(z0, t0) must be negative")

    @property
    def G_anchor(self):
        a = self.anchor
        return float(self.sol.interp(a.z0, a.t0, fields=1)[0])

    @property
    def intercept(self):
        """Wealth level at which the reduced strategy stops trading."""
        return self.anchor.x0 - 2.0 * self.anchor.y0 * self.G_anchor

    def _GGz(self, z, t):
        G, Gz = self.sol.interp(z, t, fields=2)
        return G, Gz


def zeta(fields, z, t):
    G, Gz = fields._GGz(z, t)
    return _scalar(loading(fields.model, z, G, Gz))


def optimal_pi(fields, y, z, t):
    """Markov saddle portfolio 2 y G zeta."""
    if np.any(np.asarray(y) <= 0):
        raise ValueError("y must be positive")
    G, Gz = fields._GGz(z, t)
    return _scalar(2.0 * y * G * loading(fields.model, z, G, Gz))


def optimal_eta(fields, z, t):
    """Market's saddle distortion (eta1*, eta2*)."""
    G, Gz = fields._GGz(z, t)
    e1, e2 = eta_star(fields.model, z, G, Gz)
    return _scalar(e1), _scalar(e2)


def inner_max_eta(fields, y, z, t, pi):
    """Maximiser over eta of the generator for a fixed portfolio ``pi``."""
    if np.any(np.asarray(y) <= 0):
        raise ValueError("y must be positive")
    m = fields.model
    G, Gz = fields._GGz(z, t)
    sig = np.asarray(m.sigma(z), dtype=float)
    b = np.asarray(m.b(z), dtype=float)
    e1 = sig * pi / (2.0 * y * G) - m.rho * b * (Gz / G)
    e2 = -m.rho_bar * b * (Gz / G)
    return _scalar(e1), _scalar(e2)


def reduced_pi(fields, x, z, t):
    """Wealth-feedback form (x - x0 + 2 y0 G(z0, t0)) * zeta(z, t)."""
    a = fields.anchor
    G, Gz = fields._GGz(z, t)
    k = np.asarray(x, dtype=float) - a.x0 + 2.0 * a.y0 * fields.G_anchor
    return _scalar(k * loading(fields.model, z, G, Gz))

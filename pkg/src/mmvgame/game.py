"""Generator of the game applied to V = -x + G(z, t) y, and numerical HJBI certificates.

Derivatives of G come from the stored surface (centred differences in t
and z), so the certificates are an independent check of the solve rather
than a restatement of the PDE.

The optimisations over controls are numerical: a uniform scan of the
control box, then Newton polishing with finite-difference derivatives of
the generator (exact for quadratics up to rounding), or shrinking
re-scans where the objective has a kink.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .pde import residual_resulting_equation
from .strategy import eta_star, loading

__all__ = [
    "GeneratorInput", "ControlBox", "StateGrid", "default_state_grid", "generator_apply",
    "verify_saddle_conditions", "verify_lower_equals_upper", "numeric_argmax_eta",
    "default_epsilon", "VerificationReport", "MinimaxReport",
]


@dataclass(frozen=True)
class GeneratorInput:
    x: float
    y: float
    z: float
    t: float
    pi: float
    eta1: float
    eta2: float

    def __post_init__(self):
        if self.y <= 0:
            raise ValueError("y must be positive")


@dataclass(frozen=True)
class ControlBox:
    eta_lo: float = -3.0
    eta_hi: float = 3.0
    pi_scale: float = 10.0


@dataclass(frozen=True)
class StateGrid:
    x: tuple
    y: tuple
    z: tuple
    t: tuple

    def nodes(self):
        """Array ``(N, 4)`` of (x, y, z, t) states."""
        return np.array(list(itertools.product(self.x, self.y, self.z, self.t)), dtype=float)


def default_state_grid(sol, n_z=9, n_t=5, ys=(0.5, 1.0, 2.0), xs=(0.0,)):
    """Node-aligned states at least two cells from the z boundary and before T."""
    g = sol.grid
    iz = np.unique(np.linspace(2, g.n_z - 3, n_z).round().astype(int))
    it = np.unique(np.linspace(0, g.n_t - 2, n_t).round().astype(int))
    return StateGrid(tuple(xs), tuple(ys), tuple(sol.z[iz]), tuple(sol.times[it]))


class _Coeffs:
    """Per-state coefficients of the generator, broadcast against control arrays."""

    def __init__(self, sol, model, y, z, t):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        G, Gz, Gt, Gzz = sol.interp(z, t)
        self.y, self.G, self.Gz, self.Gt, self.Gzz = y, G, Gz, Gt, Gzz
        self.sig = np.asarray(model.sigma(z), dtype=float) * np.ones_like(z)
        self.mr = np.asarray(model.mu(z), dtype=float) - model.r
        self.a = np.asarray(model.a(z), dtype=float) * np.ones_like(z)
        self.b = np.asarray(model.b(z), dtype=float) * np.ones_like(z)
        self.rho, self.rho_bar = model.rho, model.rho_bar
        self.pi_star = 2.0 * y * G * loading(model, z, G, Gz)
        self.eta_star = eta_star(model, z, G, Gz)

    def expand(self, ndim):
        """Coefficient views with ``ndim`` trailing singleton axes."""
        sh = (Ellipsis,) + (None,) * ndim
        return {k: getattr(self, k)[sh] for k in ("y", "G", "Gz", "Gt", "Gzz", "sig", "mr", "a", "b")}

    def L(self, pi, e1, e2, ndim=0):
        c = self.expand(ndim)
        rho, rb = self.rho, self.rho_bar
        yG, yGz = c["y"] * c["G"], c["y"] * c["Gz"]
        return (c["y"] * c["Gt"] - pi * (c["mr"] + c["sig"] * e1) + (e1 * e1 + e2 * e2) * yG
                + (c["a"] + c["b"] * rho * e1 + c["b"] * rb * e2) * yGz
                + 0.5 * c["b"] ** 2 * c["y"] * c["Gzz"] + c["b"] * (rho * e1 + rb * e2) * yGz)


def generator_apply(sol, model, inp):
    """Value of the game generator applied to V = -x + G y at one state/control."""
    c = _Coeffs(sol, model, np.array([inp.y]), np.array([inp.z]), np.array([inp.t]))
    return float(c.L(np.array([inp.pi]), np.array([inp.eta1]), np.array([inp.eta2]))[0])


# -- numerical optimisers ---------------------------------------------------

def _opt1d(f, lo, hi, n, maximize, polish=3):
    """Optimise f over [lo, hi] per batch element; lo/hi shaped like the batch."""
    s = np.linspace(0.0, 1.0, n)
    pts = lo[..., None] + (hi - lo)[..., None] * s
    vals = f(pts)
    sign = 1.0 if maximize else -1.0
    k = np.argmax(sign * vals, axis=-1)
    x = np.take_along_axis(pts, k[..., None], -1)[..., 0]
    best = np.take_along_axis(vals, k[..., None], -1)[..., 0]
    h = (hi - lo) / (4.0 * (n - 1))
    for _ in range(polish):
        st = np.stack([x - h, x, x + h], axis=-1)
        v = f(st)
        g = (v[..., 2] - v[..., 0]) / (2 * h)
        H = (v[..., 2] - 2 * v[..., 1] + v[..., 0]) / (h * h)
        ok = sign * H < 0
        step = np.where(ok, -g / np.where(ok, H, 1.0), 0.0)
        cand = np.clip(x + step, lo, hi)
        cv = f(cand[..., None])[..., 0]
        better = sign * cv > sign * best
        x = np.where(better, cand, x)
        best = np.where(better, cv, best)
    return best, x


def _newton2d(f, x1, x2, best, lo, hi, h, maximize, iters=3):
    sign = 1.0 if maximize else -1.0
    d = np.array([-1.0, 0.0, 1.0])
    for _ in range(iters):
        p1 = x1[..., None, None] + h * d[:, None]
        p2 = x2[..., None, None] + h * d[None, :]
        p1, p2 = np.broadcast_arrays(p1, p2)
        sh = p1.shape
        v = f(p1.reshape(sh[:-2] + (9,)), p2.reshape(sh[:-2] + (9,))).reshape(sh)
        g1 = (v[..., 2, 1] - v[..., 0, 1]) / (2 * h)
        g2 = (v[..., 1, 2] - v[..., 1, 0]) / (2 * h)
        h11 = (v[..., 2, 1] - 2 * v[..., 1, 1] + v[..., 0, 1]) / (h * h)
        h22 = (v[..., 1, 2] - 2 * v[..., 1, 1] + v[..., 1, 0]) / (h * h)
        h12 = (v[..., 2, 2] - v[..., 2, 0] - v[..., 0, 2] + v[..., 0, 0]) / (4 * h * h)
        det = h11 * h22 - h12 * h12
        ok = (det > 0) & (sign * h11 < 0)
        safe = np.where(ok, det, 1.0)
        s1 = np.where(ok, -(h22 * g1 - h12 * g2) / safe, 0.0)
        s2 = np.where(ok, -(h11 * g2 - h12 * g1) / safe, 0.0)
        c1 = np.clip(x1 + s1, lo, hi)
        c2 = np.clip(x2 + s2, lo, hi)
        cv = f(c1[..., None], c2[..., None])[..., 0]
        better = sign * cv > sign * best
        x1, x2 = np.where(better, c1, x1), np.where(better, c2, x2)
        best = np.where(better, cv, best)
    return best, x1, x2


def _opt_eta(f, lo, hi, n, maximize=True):
    """Scan an n x n eta grid then Newton-polish; f(e1, e2) over trailing axis."""
    s = np.linspace(lo, hi, n)
    e1 = np.repeat(s, n)
    e2 = np.tile(s, n)
    vals = f(e1, e2)
    sign = 1.0 if maximize else -1.0
    k = np.argmax(sign * vals, axis=-1)
    best = np.take_along_axis(vals, k[..., None], -1)[..., 0]
    x1, x2 = e1[k], e2[k]
    h = (hi - lo) / (4.0 * (n - 1))
    return _newton2d(f, x1, x2, best, lo, hi, h, maximize)


def _zoom_eta(f, lo, hi, n, maximize, iters):
    """Shrinking re-scans around the incumbent; robust to kinks."""
    sign = 1.0 if maximize else -1.0
    s = np.linspace(-1.0, 1.0, n)
    c1 = c2 = None
    half = 0.5 * (hi - lo)
    best = x1 = x2 = None
    for it in range(iters):
        if it == 0:
            g1 = np.repeat(np.linspace(lo, hi, n), n)
            g2 = np.tile(np.linspace(lo, hi, n), n)
            vals = f(g1, g2)
            k = np.argmax(sign * vals, axis=-1)
            best = np.take_along_axis(vals, k[..., None], -1)[..., 0]
            x1, x2 = g1[k], g2[k]
        else:
            p1 = np.clip(c1[..., None] + half * np.repeat(s, n), lo, hi)
            p2 = np.clip(c2[..., None] + half * np.tile(s, n), lo, hi)
            vals = f(p1, p2)
            k = np.argmax(sign * vals, axis=-1)
            v = np.take_along_axis(vals, k[..., None], -1)[..., 0]
            n1 = np.take_along_axis(p1, k[..., None], -1)[..., 0]
            n2 = np.take_along_axis(p2, k[..., None], -1)[..., 0]
            better = sign * v >= sign * best
            best = np.where(better, v, best)
            x1, x2 = np.where(better, n1, x1), np.where(better, n2, x2)
        c1, c2 = x1, x2
        spacing = (hi - lo) / (n - 1) if it == 0 else 2 * half / (n - 1)
        half = 3.0 * spacing
    return best, x1, x2


# -- certificates -----------------------------------------------------------

def default_epsilon(sol, model):
    return max(1e-3, 10.0 * residual_resulting_equation(sol, model).max_norm)


def _pi_box(c, model, sol, box):
    lam = np.abs(model.lam(sol.z))
    lam_max = max(float(np.max(lam)), 0.1)
    sig_min = float(np.min(np.asarray(model.sigma(sol.z), dtype=float) * np.ones_like(sol.z)))
    w = box.pi_scale * c.y * np.abs(c.G) * lam_max / sig_min
    w = np.maximum(w, 2.0 * np.abs(c.pi_star) + 1.0)
    return -w, w


@dataclass
class VerificationReport:
    states: np.ndarray
    margin_i: np.ndarray
    margin_ii: np.ndarray
    residual_iii: np.ndarray
    terminal_error: float
    epsilon: float
    offending: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.offending and self.terminal_error == 0.0

    @property
    def worst(self):
        return {
            "max_margin_i": float(np.max(self.margin_i)),
            "min_margin_ii": float(np.min(self.margin_ii)),
            "max_abs_residual_iii": float(np.max(np.abs(self.residual_iii))),
            "terminal_error": self.terminal_error,
        }

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "x", "y", "z", "t", "margin_i", "margin_ii", "residual_iii"])
            for k, (s, m1, m2, r3) in enumerate(zip(self.states, self.margin_i, self.margin_ii,
                                                     self.residual_iii)):
                w.writerow([k] + [format(v, ".17g") for v in (*s, m1, m2, r3)])


def verify_saddle_conditions(sol, model, state_grid=None, control_box=None, n_scan=21, epsilon=None):
    """Check the verification inequalities at every state node.

    (i) max over eta of L(pi*, eta) <= eps, (ii) min over pi of L(pi, eta*)
    >= -eps, (iii) |L(pi*, eta*)| <= eps, (iv) V(x, y, z, T) = -x - y.
    """
    if n_scan < 10:
        raise ValueError("n_scan must be at least 10 per axis")
    state_grid = state_grid or default_state_grid(sol)
    box = control_box or ControlBox()
    eps = default_epsilon(sol, model) if epsilon is None else epsilon
    S = state_grid.nodes()
    c = _Coeffs(sol, model, S[:, 1], S[:, 2], S[:, 3])
    pi_s = c.pi_star
    e1s, e2s = c.eta_star

    m1, _, _ = _opt_eta(lambda e1, e2: c.L(pi_s[:, None], e1, e2, 1), box.eta_lo, box.eta_hi, n_scan)
    lo, hi = _pi_box(c, model, sol, box)
    m2, _ = _opt1d(lambda p: c.L(p, e1s[:, None], e2s[:, None], 1), lo, hi, n_scan, maximize=False)
    r3 = c.L(pi_s, e1s, e2s)

    # terminal condition read straight off the stored surface
    GT = sol.G[:, -1]
    term = float(np.max(np.abs((-S[:, :1] + GT[None, :] * S[:, 1:2]) - (-S[:, :1] - S[:, 1:2]))))

    bad = (m1 > eps) | (m2 < -eps) | (np.abs(r3) > eps)
    offending = [tuple(S[k]) for k in np.flatnonzero(bad)]
    return VerificationReport(S, m1, m2, r3, term, eps, offending)


@dataclass
class MinimaxReport:
    states: np.ndarray
    minmax: np.ndarray
    maxmin: np.ndarray
    epsilon: float

    @property
    def gap(self):
        return np.abs(self.minmax - self.maxmin)

    @property
    def passed(self):
        eps = self.epsilon
        return bool(np.all(np.abs(self.minmax) <= eps) and np.all(np.abs(self.maxmin) <= eps)
                    and np.all(self.gap <= eps))


def verify_lower_equals_upper(sol, model, state_grid=None, control_box=None, n_scan=21, epsilon=None,
                              zoom_iters=25):
    """Compare min_pi max_eta L and max_eta min_pi L at every state node."""
    if n_scan < 10:
        raise ValueError("n_scan must be at least 10 per axis")
    state_grid = state_grid or default_state_grid(sol)
    box = control_box or ControlBox()
    eps = default_epsilon(sol, model) if epsilon is None else epsilon
    S = state_grid.nodes()
    c = _Coeffs(sol, model, S[:, 1], S[:, 2], S[:, 3])
    lo, hi = _pi_box(c, model, sol, box)

    def upper_inner(p):
        # p: (N, M) candidate portfolios -> max over eta for each
        return _opt_eta(lambda e1, e2: c.L(p[..., None], e1, e2, 2),
                        box.eta_lo, box.eta_hi, n_scan)[0]

    minmax, _ = _opt1d(upper_inner, lo, hi, n_scan, maximize=False)

    def lower_inner(e1, e2):
        # e1, e2: (N, M) candidate distortions -> min over the portfolio box
        e1, e2, _ = np.broadcast_arrays(e1, e2, lo[:, None])
        lo_b = np.broadcast_to(lo[:, None], e1.shape)
        hi_b = np.broadcast_to(hi[:, None], e1.shape)
        return _opt1d(lambda p: c.L(p, e1[..., None], e2[..., None], 2), lo_b, hi_b,
                      n_scan, maximize=False, polish=0)[0]

    maxmin, _, _ = _zoom_eta(lower_inner, box.eta_lo, box.eta_hi, n_scan, True, zoom_iters)
    return MinimaxReport(S, minmax, maxmin, eps)


def numeric_argmax_eta(sol, model, y, z, t, pi, control_box=None, n_scan=41):
    """Numerically located maximiser over eta of L(pi, eta) at one state."""
    box = control_box or ControlBox()
    c = _Coeffs(sol, model, np.array([y]), np.array([z]), np.array([t]))
    p = np.array([pi])
    _, e1, e2 = _opt_eta(lambda a, b: c.L(p[:, None], a, b, 1), box.eta_lo, box.eta_hi, n_scan)
    return float(e1[0]), float(e2[0])

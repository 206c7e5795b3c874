"""Monte Carlo simulation of the controlled wealth / density / factor system.

Under P the Brownian drivers are (W1, W2); under Q^eta they are the shifted
motions W^eta = W - int eta ds, so only the drifts change:

    dX = pi (mu - r + sigma eta1) dt + pi sigma dW1
    dZ = (a + b rho eta1 + b rho_bar eta2) dt + b (rho dW1 + rho_bar dW2)
    dY = Y (|eta|^2 dt + eta . dW)

with the eta terms dropped under P. X and Z use Euler-Maruyama; Y uses the
exact exponential increment so it stays positive.

Paths are stored with antithetic mirrors interleaved (rows 2q, 2q+1), and
every estimator averages mirror pairs before forming standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExcessiveExcursion
from .streams import chunk_ranges, mean_se, path_normals  # noqa: F401  (mean_se re-exported)
from .strategy import ControlFields, optimal_eta, optimal_pi

EXCURSION_LIMIT = 0.01

__all__ = [
    "PathBundle", "Controls", "Perturbation", "saddle_controls", "constant_controls",
    "brownian_increments", "coarsen", "simulate_system", "check_reduction_identity",
    "objective_from_terminal", "estimate_objective_under_Q", "estimate_objective_under_P",
    "default_perturbations", "certify_saddle_mc", "SaddleMcReport", "estimate_penalty",
    "density_martingale_check",
]


@dataclass(frozen=True)
class Controls:
    """Feedback controls ``pi(x, y, z, t)`` and ``eta(x, y, z, t) -> (eta1, eta2)``."""

    pi: object
    eta: object
    label: str = "custom"


def saddle_controls(fields: ControlFields):
    """Markov saddle pair read off the value surface."""
    def pi(x, y, z, t):
        return optimal_pi(fields, y, z, t)

    def eta(x, y, z, t):
        return optimal_eta(fields, z, t)

    return Controls(pi, eta, "saddle")


def constant_controls(pi=0.0, eta1=0.0, eta2=0.0):
    def _pi(x, y, z, t):
        return np.full(np.shape(x), float(pi))

    def _eta(x, y, z, t):
        return np.full(np.shape(x), float(eta1)), np.full(np.shape(x), float(eta2))

    return Controls(_pi, _eta, f"const({pi:g},{eta1:g},{eta2:g})")


@dataclass
class PathBundle:
    times: np.ndarray
    X: np.ndarray | None
    Y: np.ndarray | None
    Z: np.ndarray | None
    X_T: np.ndarray
    Y_T: np.ndarray
    Z_T: np.ndarray
    measure_tag: str
    y0: float
    antithetic: bool
    excursions: int = 0
    path_steps: int = 0
    sup_abs_xy: float = math.nan
    dW1: np.ndarray | None = None
    dW2: np.ndarray | None = None

    @property
    def under_P(self):
        return self.measure_tag == "P"

    @property
    def excursion_rate(self):
        return self.excursions / self.path_steps if self.path_steps else 0.0

    def to_csv(self, path, every=1):
        """Long-format path dump: path, t, X, Y, Z."""
        if self.X is None:
            raise ValueError("bundle was simulated without full paths")
        with open(path, "w") as fh:
            fh.write("path,t,X,Y,Z\n")
            for p in range(self.X.shape[0]):
                for k in range(0, self.times.size, every):
                    fh.write("%d,%.17g,%.17g,%.17g,%.17g\n"
                             % (p, self.times[k], self.X[p, k], self.Y[p, k], self.Z[p, k]))


def _interleave(a):
    """Reorder the last axis from [base..., mirrors...] to mirror pairs."""
    m = a.shape[-1] // 2
    out = np.empty_like(a)
    out[..., 0::2] = a[..., :m]
    out[..., 1::2] = a[..., m:]
    return out


def brownian_increments(cfg, horizon):
    """All Brownian increments ``(n_steps, 2, n_paths)`` with mirrors interleaved."""
    ds = horizon / cfg.n_steps
    parts = []
    for start, stop in chunk_ranges(cfg.n_base):
        xi = path_normals(cfg, start, stop, 2)
        parts.append(_interleave(xi) if cfg.antithetic else xi)
    return math.sqrt(ds) * np.concatenate(parts, axis=2)


def coarsen(increments, factor=2):
    """Sum consecutive increments so a coarser run shares the same Brownian path."""
    n = increments.shape[0]
    if n % factor:
        raise ValueError("n_steps not divisible by the coarsening factor")
    return increments.reshape(n // factor, factor, *increments.shape[1:]).sum(axis=1)


def _run(model, sol, controls, measure, x0, y0, z0, t0, dW, keep_paths):
    n_steps, _, n = dW.shape
    T = model.horizon_T
    ds = (T - t0) / n_steps
    g = sol.grid
    under_q = measure != "P"
    rho, rb = model.rho, model.rho_bar
    X = np.full(n, float(x0))
    Y = np.full(n, float(y0))
    Z = np.full(n, float(z0))
    times = t0 + ds * np.arange(n_steps + 1)
    times[-1] = T
    if keep_paths:
        PX, PY, PZ = (np.empty((n, n_steps + 1)) for _ in range(3))
        PX[:, 0], PY[:, 0], PZ[:, 0] = X, Y, Z
    sup = np.abs(X) + np.abs(Y)
    exc = 0
    for k in range(n_steps):
        t = times[k]
        out = (Z < g.z_lo) | (Z > g.z_hi)
        exc += int(np.count_nonzero(out))
        zc = np.clip(Z, g.z_lo, g.z_hi)
        mu = np.asarray(model.mu(zc), dtype=float)
        sig = np.asarray(model.sigma(zc), dtype=float)
        a = np.asarray(model.a(zc), dtype=float)
        b = np.asarray(model.b(zc), dtype=float)
        p = np.asarray(controls.pi(X, Y, zc, t), dtype=float)
        e1, e2 = controls.eta(X, Y, zc, t)
        e1 = np.asarray(e1, dtype=float)
        e2 = np.asarray(e2, dtype=float)
        d1, d2 = dW[k, 0], dW[k, 1]
        ee = e1 * e1 + e2 * e2
        if under_q:
            X = X + p * (mu - model.r + sig * e1) * ds + p * sig * d1
            Z = Z + (a + b * rho * e1 + b * rb * e2) * ds + b * (rho * d1 + rb * d2)
            Y = Y * np.exp(e1 * d1 + e2 * d2 + 0.5 * ee * ds)
        else:
            X = X + p * (mu - model.r) * ds + p * sig * d1
            Z = Z + a * ds + b * (rho * d1 + rb * d2)
            Y = Y * np.exp(e1 * d1 + e2 * d2 - 0.5 * ee * ds)
        np.maximum(sup, np.abs(X) + np.abs(Y), out=sup)
        if keep_paths:
            PX[:, k + 1], PY[:, k + 1], PZ[:, k + 1] = X, Y, Z
    paths = (PX, PY, PZ) if keep_paths else (None, None, None)
    return times, paths, (X, Y, Z), exc, sup


def simulate_system(model, sol, controls, measure, x0, y0, z0, t0, cfg, keep_paths=True,
                    keep_noise=False, increments=None):
    """Simulate (X, Y, Z) on [t0, T] under ``measure`` ("P" or "Q").

    ``increments`` (shape ``(n_steps, 2, n_paths)``) overrides the noise drawn
    from ``cfg``; use :func:`brownian_increments` and :func:`coarsen` for
    common-random-number and step-halving studies.
    """
    if y0 <= 0:
        raise ValueError("y0 must be positive")
    if not t0 < model.horizon_T:
        raise ValueError("t0 must be before the horizon")
    if measure not in ("P", "Q"):
        raise ValueError("measure must be 'P' or 'Q'")
    if increments is None:
        increments = brownian_increments(cfg, model.horizon_T - t0)
    times, paths, term, exc, sup = _run(model, sol, controls, measure, x0, y0, z0, t0,
                                        increments, keep_paths)
    n_steps, _, n = increments.shape
    total = n * n_steps
    if exc > EXCURSION_LIMIT * total:
        raise ExcessiveExcursion(f"{exc} of {total} path-steps left the grid domain")
    tag = "P" if measure == "P" else f"Q({controls.label})"
    return PathBundle(
        times=times, X=paths[0], Y=paths[1], Z=paths[2], X_T=term[0], Y_T=term[1], Z_T=term[2],
        measure_tag=tag, y0=float(y0), antithetic=cfg.antithetic, excursions=exc, path_steps=total,
        sup_abs_xy=float(np.mean(sup)),
        dW1=increments[:, 0].T.copy() if keep_noise else None,
        dW2=increments[:, 1].T.copy() if keep_noise else None,
    )


def check_reduction_identity(bundle, sol, anchor):
    """Max over paths/times of |2 Y G(Z, t) - X + x0 - 2 y0 G(z0, t0)|, plus its time profile."""
    if bundle.X is None:
        raise ValueError("bundle was simulated without full paths")
    G0 = float(sol.interp(anchor.z0, anchor.t0, fields=1)[0])
    c = anchor.x0 - 2.0 * anchor.y0 * G0
    prof = np.empty(bundle.times.size)
    for k, t in enumerate(bundle.times):
        (G,), _ = sol.interp_clamped(bundle.Z[:, k], t, fields=1)
        prof[k] = np.max(np.abs(2.0 * bundle.Y[:, k] * G - bundle.X[:, k] + c))
    return float(prof.max()), prof


def _pairs(v, antithetic):
    return 0.5 * (v[0::2] + v[1::2]) if antithetic else v


def objective_from_terminal(X_T, Y_T, y0, measure, antithetic=True):
    """Estimate J = E^eta[-X_T - Y_T] from terminal samples, returning (J, se).

    Under P the density weight w = Y_T / y0 is applied in self-normalised
    form, sum(w f) / sum(w), with a delta-method standard error.
    """
    f = -np.asarray(X_T, dtype=float) - np.asarray(Y_T, dtype=float)
    if measure == "Q":
        return mean_se(_pairs(f, antithetic))
    w = np.asarray(Y_T, dtype=float) / y0
    wf = _pairs(w * f, antithetic)
    wp = _pairs(w, antithetic)
    wbar = math.fsum(wp) / wp.size
    J = math.fsum(wf) / math.fsum(wp)
    _, se = mean_se((wf - J * wp) / wbar)
    return J, se


def _measure(bundle):
    return "P" if bundle.under_P else "Q"


def estimate_objective_under_Q(model, sol, controls, x0, y0, z0, t0, cfg, increments=None):
    b = simulate_system(model, sol, controls, "Q", x0, y0, z0, t0, cfg, keep_paths=False,
                        increments=increments)
    return objective_from_terminal(b.X_T, b.Y_T, y0, "Q", cfg.antithetic)


def estimate_objective_under_P(model, sol, controls, x0, y0, z0, t0, cfg, increments=None):
    b = simulate_system(model, sol, controls, "P", x0, y0, z0, t0, cfg, keep_paths=False,
                        increments=increments)
    return objective_from_terminal(b.X_T, b.Y_T, y0, "P", cfg.antithetic)


def estimate_penalty(bundle):
    """Gini index E^P[(dQ/dP)^2] - 1 from a bundle simulated under P."""
    if not bundle.under_P:
        raise ValueError("penalty needs a bundle simulated under P")
    w = bundle.Y_T / bundle.y0
    return mean_se(_pairs(w * w - 1.0, bundle.antithetic))


def density_martingale_check(bundle, n_se=3.0):
    """Mean of Y_T/y0 under P and whether it is within ``n_se`` standard errors of 1."""
    if not bundle.under_P:
        raise ValueError("density check needs a bundle simulated under P")
    m, se = mean_se(_pairs(bundle.Y_T / bundle.y0, bundle.antithetic))
    return m, se, abs(m - 1.0) <= n_se * se


# -- saddle certification ---------------------------------------------------

@dataclass(frozen=True)
class Perturbation:
    label: str
    kind: str  # "pi" or "eta"
    controls: Controls


def default_perturbations(saddle: Controls, scales=(0.5, 0.9, 1.1, 1.5), shift=0.2):
    """Scaled and shifted versions of the saddle controls."""
    out = []

    def pi_scaled(s):
        return lambda x, y, z, t: s * np.asarray(saddle.pi(x, y, z, t))

    def pi_shift(d):
        return lambda x, y, z, t: np.asarray(saddle.pi(x, y, z, t)) + d

    def eta_scaled(s):
        def f(x, y, z, t):
            e1, e2 = saddle.eta(x, y, z, t)
            return s * np.asarray(e1), s * np.asarray(e2)
        return f

    def eta_shift(d1, d2):
        def f(x, y, z, t):
            e1, e2 = saddle.eta(x, y, z, t)
            return np.asarray(e1) + d1, np.asarray(e2) + d2
        return f

    for s in scales:
        out.append(Perturbation(f"pi*{s:g}", "pi", Controls(pi_scaled(s), saddle.eta, f"pi*{s:g}")))
    for d in (-shift, shift):
        out.append(Perturbation(f"pi{d:+g}", "pi", Controls(pi_shift(d), saddle.eta, f"pi{d:+g}")))
    for s in scales:
        out.append(Perturbation(f"eta*{s:g}", "eta", Controls(saddle.pi, eta_scaled(s), f"eta*{s:g}")))
    for d1, d2 in ((-shift, 0.0), (shift, 0.0), (0.0, -shift), (0.0, shift)):
        lab = f"eta{d1:+g},{d2:+g}"
        out.append(Perturbation(lab, "eta", Controls(saddle.pi, eta_shift(d1, d2), lab)))
    return out


@dataclass
class SaddleMcReport:
    J_star: float
    se_star: float
    value: float
    rows: list = field(default_factory=list)  # (label, kind, J, se, diff, se_diff, ok)
    n_se: float = 3.0

    @property
    def value_ok(self):
        # round-off floor for deterministic (zero-variance) cases
        floor = 1e-12 * max(1.0, abs(self.value))
        return abs(self.J_star - self.value) <= self.n_se * self.se_star + floor

    @property
    def violations(self):
        return [r[0] for r in self.rows if not r[-1]]

    @property
    def passed(self):
        return self.value_ok and not self.violations


def certify_saddle_mc(model, sol, anchor, perturbations=None, cfg=None, n_se=3.0):
    """Check J(pi*, eta) <= J(pi*, eta*) <= J(pi, eta*) under common random numbers.

    Each comparison uses the standard error of the paired per-sample
    difference, which is what common random numbers make small.
    """
    fields = ControlFields(sol, model, anchor)
    saddle = saddle_controls(fields)
    perturbations = default_perturbations(saddle) if perturbations is None else perturbations
    a = anchor
    dW = brownian_increments(cfg, model.horizon_T - a.t0)

    def samples(ctrl):
        b = simulate_system(model, sol, ctrl, "Q", a.x0, a.y0, a.z0, a.t0, cfg, keep_paths=False,
                            increments=dW)
        return _pairs(-b.X_T - b.Y_T, cfg.antithetic)

    f_star = samples(saddle)
    J_star, se_star = mean_se(f_star)
    value = -a.x0 + fields.G_anchor * a.y0
    rep = SaddleMcReport(J_star, se_star, value, n_se=n_se)
    for p in perturbations:
        f = samples(p.controls)
        J, se = mean_se(f)
        # eta perturbations may not raise J; pi perturbations may not lower it
        diff = f - f_star if p.kind == "eta" else f_star - f
        d, sd = mean_se(diff)
        ok = d <= n_se * sd if sd > 0 else d <= 1e-12 * max(1.0, abs(J_star))
        rep.rows.append((p.label, p.kind, J, se, d, sd, bool(ok)))
    return rep

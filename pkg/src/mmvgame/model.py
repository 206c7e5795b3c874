"""One-factor market model and its coefficient families.

The risky asset and the factor follow

    dS = mu(Z) S dt + sigma(Z) S dW1
    dZ = a(Z) dt + b(Z) (rho dW1 + rho_bar dW2)

with a constant riskless rate ``r``. Coefficients are time homogeneous.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonPositiveVolatility

CONSTANT = "constant"
OU_TANH = "ou_tanh"
FAMILY_KINDS = (CONSTANT, OU_TANH)


@dataclass(frozen=True)
class _Const:
    value: float

    def __call__(self, z):
        return np.full(np.shape(z), self.value, dtype=float) if np.ndim(z) else float(self.value)


@dataclass(frozen=True)
class _OuDrift:
    kappa: float
    m: float

    def __call__(self, z):
        return self.kappa * (self.m - np.asarray(z, dtype=float))


@dataclass(frozen=True)
class _TanhDrift:
    r: float
    sigma0: float
    lam0: float
    lam1: float

    def __call__(self, z):
        return self.r + self.sigma0 * (self.lam0 + self.lam1 * np.tanh(z))


@dataclass(frozen=True)
class ModelFamily:
    """A named parametric family of coefficient functions.

    ``kind`` is ``"constant"`` (Black-Scholes with a dummy factor; params
    ``mu, sigma, a, b``) or ``"ou_tanh"`` (params ``kappa, m, beta, sigma0,
    lam0, lam1``).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown model family {self.kind!r}")
        required = {
            CONSTANT: ("mu", "sigma", "a", "b"),
            OU_TANH: ("kappa", "m", "beta", "sigma0", "lam0", "lam1"),
        }[self.kind]
        missing = [k for k in required if k not in self.params]
        if missing:
            raise ValueError(f"{self.kind} family needs parameters {missing}")
        p = self.params
        if self.kind == CONSTANT:
            if p["sigma"] <= 0 or p["b"] <= 0:
                raise ValueError("constant family needs sigma > 0 and b > 0")
        else:
            if p["sigma0"] <= 0 or p["beta"] <= 0:
                raise ValueError("ou_tanh family needs sigma0 > 0 and beta > 0")

    def build(self, r, rho, horizon_T):
        """Instantiate the family as a :class:`FactorMarketModel`."""
        p = {k: float(v) for k, v in self.params.items()}
        if self.kind == CONSTANT:
            return FactorMarketModel(
                mu=_Const(p["mu"]), sigma=_Const(p["sigma"]), a=_Const(p["a"]), b=_Const(p["b"]),
                r=r, rho=rho, horizon_T=horizon_T, family=self,
            )
        return FactorMarketModel(
            mu=_TanhDrift(r, p["sigma0"], p["lam0"], p["lam1"]),
            sigma=_Const(p["sigma0"]),
            a=_OuDrift(p["kappa"], p["m"]),
            b=_Const(p["beta"]),
            r=r, rho=rho, horizon_T=horizon_T, family=self,
        )

    def declared_bounds(self, r):
        """Return ``(lam_max, sigma_min, b2_min)`` guaranteed by construction."""
        p = self.params
        if self.kind == CONSTANT:
            lam = abs((p["mu"] - r) / p["sigma"])
            return lam, float(p["sigma"]), float(p["b"]) ** 2
        return abs(p["lam0"]) + abs(p["lam1"]), float(p["sigma0"]), float(p["beta"]) ** 2


@dataclass(frozen=True)
class FactorMarketModel:
    mu: Callable
    sigma: Callable
    a: Callable
    b: Callable
    r: float
    rho: float
    horizon_T: float
    family: Optional[ModelFamily] = None

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("riskless rate must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.horizon_T <= 0:
            raise ValueError("horizon_T must be positive")
        if self.family is None:
            warnings.warn("user-defined coefficients: existence of a strong solution and the bounds "
                          "on lambda, sigma and b are not checked; audit them before relying on results",
                          UserWarning, stacklevel=3)

    @property
    def rho_bar(self):
        return math.sqrt(max(0.0, 1.0 - self.rho * self.rho))

    def lam(self, z):
        """Market price of risk, vectorised over ``z``."""
        s = np.asarray(self.sigma(z), dtype=float)
        if np.any(s <= 0):
            raise NonPositiveVolatility("sigma(z) <= 0 where the market price of risk is needed")
        out = (np.asarray(self.mu(z), dtype=float) - self.r) / s
        return out if np.ndim(out) else float(out)


def constant_coefficients(mu, sigma, a=0.0, b=0.3, *, r=0.02, rho=0.0, horizon_T=1.0):
    return ModelFamily(CONSTANT, dict(mu=mu, sigma=sigma, a=a, b=b)).build(r, rho, horizon_T)


def black_scholes(lam, sigma, *, r=0.02, rho=0.0, horizon_T=1.0, b=0.3):
    """Constant-coefficient model parameterised by its market price of risk."""
    return constant_coefficients(r + lam * sigma, sigma, 0.0, b, r=r, rho=rho, horizon_T=horizon_T)


def ou_tanh(kappa=1.0, m=0.0, beta=0.5, sigma0=0.2, lam0=0.3, lam1=0.1, *,
            r=0.02, rho=0.0, horizon_T=1.0):
    params = dict(kappa=kappa, m=m, beta=beta, sigma0=sigma0, lam0=lam0, lam1=lam1)
    return ModelFamily(OU_TANH, params).build(r, rho, horizon_T)


def with_rho(model, rho):
    """Copy of ``model`` with a different correlation."""
    return FactorMarketModel(model.mu, model.sigma, model.a, model.b,
                             model.r, rho, model.horizon_T, model.family)


def market_price_of_risk(model, z):
    """``(mu(z) - r) / sigma(z)``; raises NonPositiveVolatility if sigma(z) <= 0."""
    return model.lam(z)


@dataclass
class AuditReport:
    z_lo: float
    z_hi: float
    sigma_min: float
    b2_min: float
    lam_max_abs: float
    lipschitz: dict
    violations: list
    nonpositive_sigma_region: Optional[tuple] = None

    @property
    def passed(self):
        return not self.violations


def _lipschitz_quotient(values, dz):
    if values.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(values))) / dz)


def audit_assumptions(model, z_lo, z_hi, n_samples, *, sigma_floor=None, b2_floor=None,
                      lam_bound=None, lipschitz_bound=None):
    """Sample the coefficients on a uniform grid and check the standing assumptions.

    Thresholds default to the family's declared bounds when the model was
    built from a :class:`ModelFamily`; otherwise only strict positivity of
    ``sigma`` and ``b**2`` is enforced. A failing audit is reported, never
    raised.
    """
    if not z_lo < z_hi:
        raise ValueError("audit domain needs z_lo < z_hi")
    if n_samples < 2:
        raise ValueError("audit needs at least two samples")
    z = np.linspace(z_lo, z_hi, int(n_samples))
    dz = z[1] - z[0]
    sig = np.asarray(model.sigma(z), dtype=float) * np.ones_like(z)
    b = np.asarray(model.b(z), dtype=float) * np.ones_like(z)
    a = np.asarray(model.a(z), dtype=float) * np.ones_like(z)
    mu = np.asarray(model.mu(z), dtype=float) * np.ones_like(z)

    if model.family is not None:
        lam_decl, sig_decl, b2_decl = model.family.declared_bounds(model.r)
        sigma_floor = sig_decl if sigma_floor is None else sigma_floor
        b2_floor = b2_decl if b2_floor is None else b2_floor
        lam_bound = lam_decl if lam_bound is None else lam_bound

    violations = []
    bad = sig <= 0
    region = None
    if np.any(bad):
        region = (float(z[bad][0]), float(z[bad][-1]))
        violations.append(f"NonPositiveVolatility on [{region[0]:.6g}, {region[1]:.6g}]")
        lam = np.full_like(z, np.nan)
        lam[~bad] = (mu[~bad] - model.r) / sig[~bad]
    else:
        lam = (mu - model.r) / sig

    # small relative slack absorbs rounding in the family formulas
    slack = 1e-12
    if sigma_floor is not None and not bad.any() and sig.min() < sigma_floor * (1 - slack):
        violations.append(f"sigma below floor {sigma_floor:.6g}")
    if np.any(b * b <= 0):
        violations.append("b^2 not strictly positive")
    elif b2_floor is not None and (b * b).min() < b2_floor * (1 - slack):
        violations.append(f"b^2 below floor {b2_floor:.6g}")
    lam_abs = float(np.nanmax(np.abs(lam))) if np.any(np.isfinite(lam)) else math.nan
    if lam_bound is not None and lam_abs > lam_bound * (1 + slack) + slack:
        violations.append(f"|lambda| exceeds bound {lam_bound:.6g}")

    lip = {
        "a": _lipschitz_quotient(a, dz),
        "b": _lipschitz_quotient(b, dz),
        "b_lambda": _lipschitz_quotient(b * lam, dz) if not bad.any() else math.inf,
        "lambda_sq": _lipschitz_quotient(lam * lam, dz) if not bad.any() else math.inf,
    }
    if lipschitz_bound is not None:
        for name, q in lip.items():
            if q > lipschitz_bound:
                violations.append(f"Lipschitz quotient of {name} is {q:.6g} > {lipschitz_bound:.6g}")

    return AuditReport(
        z_lo=float(z_lo), z_hi=float(z_hi),
        sigma_min=float(sig.min()), b2_min=float((b * b).min()),
        lam_max_abs=lam_abs, lipschitz=lip, violations=violations,
        nonpositive_sigma_region=region,
    )

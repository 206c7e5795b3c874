"""YAML run configuration shared by the CLI subcommands.

Example::

    model:
      family: ou_tanh
      params: {kappa: 1.0, m: 0.0, beta: 0.5, sigma0: 0.2, lam0: 0.3, lam1: 0.1}
      r: 0.02
      rho: 0.5
      horizon_T: 1.0
    grid: {z_lo: -6.0, z_hi: 6.0, n_z: 401, n_t: 401}
    mc: {n_paths: 20000, n_steps: 256, seed: 7}
    anchor: {x0: 1.0, y0: 0.5, z0: 0.0}
    output_dir: out

Every section except ``model`` is optional.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from .errors import ConfigError
from .model import ModelFamily
from .pde import GridSpec, default_grid
from .strategy import Anchor
from .streams import McConfig

DEFAULT_TOLERANCES = {
    "epsilon": None,  # certificate tolerance; None means the residual-based default
    "residual_tol": 1e-2,  # diagnostic bound inside the linear solve
    "n_se": 3.0,
    "reduction_max": 1e-2,
    "ratio_rel": 1e-6,
    "theta_abs": 1e-10,
}


@dataclass
class RunConfig:
    family: ModelFamily
    r: float = 0.02
    rho: float = 0.0
    horizon_T: float = 1.0
    grid: Optional[GridSpec] = None
    mc: McConfig = field(default_factory=lambda: McConfig(20000, 256, 0))
    anchor: Anchor = field(default_factory=lambda: Anchor(1.0, 0.5, 0.0, 0.0))
    theta: Optional[float] = None
    output_dir: str = "out"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    probes: list = field(default_factory=list)
    explicit_tolerances: set = field(default_factory=set)
    n_scan: int = 21
    mv_moments: str = "auto"  # auto | mc | closed_form

    def build_model(self):
        return self.family.build(self.r, self.rho, self.horizon_T)

    def build_grid(self, model=None):
        return self.grid if self.grid is not None else default_grid(model or self.build_model())

    def with_seed(self, seed):
        m = self.mc
        self.mc = McConfig(m.n_paths, m.n_steps, seed, m.antithetic)
        return self


def _num(d, key, where, default=None, kind=float):
    name = f"{where}.{key}" if where else key
    if key not in d:
        if default is None:
            raise ConfigError(name, "missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(name, "expected an integer")
        return int(v)
    return float(v)


def _section(d, key):
    v = d.get(key, {})
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigError(key, "expected a mapping")
    return v


def from_dict(d):
    """Validate a parsed document and build a :class:`RunConfig`."""
    if not isinstance(d, dict):
        raise ConfigError("<root>", "expected a mapping at the top level")
    if "model" not in d:
        raise ConfigError("model", "missing")
    m = _section(d, "model")
    fam = m.get("family")
    if fam is None:
        raise ConfigError("model.family", "missing")
    params = m.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("model.params", "expected a mapping")
    for k, v in params.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"model.params.{k}", f"expected a number, got {v!r}")
    try:
        family = ModelFamily(str(fam), {k: float(v) for k, v in params.items()})
    except ValueError as exc:
        raise ConfigError("model.family" if "family" in str(exc) else "model.params", str(exc))
    r = _num(m, "r", "model", 0.02)
    rho = _num(m, "rho", "model", 0.0)
    T = _num(m, "horizon_T", "model", 1.0)
    if not -1.0 <= rho <= 1.0:
        raise ConfigError("model.rho", "must lie in [-1, 1]")
    if T <= 0:
        raise ConfigError("model.horizon_T", "must be positive")
    if r < 0:
        raise ConfigError("model.r", "must be nonnegative")
    cfg = RunConfig(family=family, r=r, rho=rho, horizon_T=T)

    if "grid" in d:
        g = _section(d, "grid")
        try:
            cfg.grid = GridSpec(_num(g, "z_lo", "grid"), _num(g, "z_hi", "grid"),
                                _num(g, "n_z", "grid", 401, int), _num(g, "n_t", "grid", 401, int))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("grid", str(exc))

    mc = _section(d, "mc")
    anti = mc.get("antithetic", True)
    if not isinstance(anti, bool):
        raise ConfigError("mc.antithetic", "expected true/false")
    try:
        cfg.mc = McConfig(_num(mc, "n_paths", "mc", 20000, int), _num(mc, "n_steps", "mc", 256, int),
                          _num(mc, "seed", "mc", 0, int), anti)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("mc", str(exc))

    a = _section(d, "anchor")
    x0, y0 = _num(a, "x0", "anchor", 1.0), _num(a, "y0", "anchor", 0.5)
    z0, t0 = _num(a, "z0", "anchor", 0.0), _num(a, "t0", "anchor", 0.0)
    if y0 <= 0:
        raise ConfigError("anchor.y0", "must be positive")
    if not 0.0 <= t0 < T:
        raise ConfigError("anchor.t0", "must lie in [0, horizon_T)")
    cfg.anchor = Anchor(x0, y0, z0, t0)

    if d.get("theta") is not None:
        cfg.theta = _num(d, "theta", "")
        if cfg.theta <= 0:
            raise ConfigError("theta", "must be positive")
    out = d.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("output_dir", "expected a path string")
    cfg.output_dir = out

    tol = _section(d, "tolerances")
    for k, v in tol.items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{k}", "unknown tolerance")
        val = _num(tol, k, "tolerances")
        if val <= 0:
            raise ConfigError(f"tolerances.{k}", "must be positive")
        cfg.tolerances[k] = val
        cfg.explicit_tolerances.add(k)

    probes = d.get("probes", [])
    if not isinstance(probes, list):
        raise ConfigError("probes", "expected a list of [z, t] pairs")
    for i, p in enumerate(probes):
        if (not isinstance(p, (list, tuple)) or len(p) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)):
            raise ConfigError(f"probes[{i}]", "expected [z, t]")
        if not 0.0 <= p[1] < T:
            raise ConfigError(f"probes[{i}]", "t must lie in [0, horizon_T)")
    cfg.probes = [(float(z), float(t)) for z, t in probes]

    if "n_scan" in d:
        cfg.n_scan = _num(d, "n_scan", "", kind=int)
        if cfg.n_scan < 10:
            raise ConfigError("n_scan", "must be at least 10")
    mvm = d.get("mv_moments", "auto")
    if mvm not in ("auto", "mc", "closed_form"):
        raise ConfigError("mv_moments", "expected auto, mc or closed_form")
    cfg.mv_moments = mvm
    return cfg


def load_config(path):
    """Read and validate a YAML config; I/O and syntax problems become ConfigError."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}")
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"invalid YAML: {exc}")
    return from_dict(doc)

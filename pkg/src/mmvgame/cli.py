"""Command-line entry point.

Exit codes: 0 when every check passes, 1 when checks ran and failed,
2 for configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import _kernels, game, meanvar, oracle, pde, sim
from .config import ConfigError, RunConfig, load_config
from .csvio import surface_table, write_matrix, write_rows, write_summary
from .errors import DegenerateER, DegenerateVariance, MmvError
from .model import black_scholes
from .strategy import Anchor, ControlFields, optimal_eta, optimal_pi, reduced_pi, zeta

log = logging.getLogger("mmvgame")

OUT_ENV = "MMVGAME_OUT"
DEFAULT_PROBES = [(0.0, 0.0), (0.6, 0.0), (-0.6, 0.25), (0.9, 0.5), (-1.2, 0.75)]


def _out(cfg, name):
    return os.path.join(cfg.output_dir, name)


def _solve(cfg):
    model = cfg.build_model()
    grid = cfg.build_grid(model)
    return model, grid, pde.solve(model, grid, cfg.tolerances["residual_tol"])


def cmd_solve(cfg: RunConfig):
    model, grid, sol = _solve(cfg)
    res = pde.residual_resulting_equation(sol, model)
    header, table = surface_table(sol, res.values)
    write_matrix(_out(cfg, "G_surface.csv"), header, table)
    write_summary(_out(cfg, "solve_summary.csv"), [
        ("case", sol.case_tag.kind), ("n_z", grid.n_z), ("n_t", grid.n_t),
        ("z_lo", grid.z_lo), ("z_hi", grid.z_hi), ("residual_max", res.max_norm),
        ("G_min", float(sol.G.min())), ("G_max", float(sol.G.max())), ("backend", _kernels.BACKEND),
    ])
    print(f"case {sol.case_tag.kind}: residual max-norm {res.max_norm:.3e}")
    return 0


def _interp_F(sol, z, t):
    g = sol.grid
    return float(_kernels.bilinear(np.ascontiguousarray(sol.F[None]), g.z_lo, g.dz, 0.0, sol.dt,
                                   np.array([z]), np.array([t]))[0, 0])


def cmd_oracle(cfg: RunConfig, probes=None):
    model, grid, sol = _solve(cfg)
    probes = probes or cfg.probes or DEFAULT_PROBES
    n_se = cfg.tolerances["n_se"]
    rows, ok = [], True
    for z, t in probes:
        f_pde = _interp_F(sol, z, t)
        f_mc, se = oracle.estimate_F(model, z, t, cfg.mc)
        zs = (f_pde - f_mc) / se if se > 0 else (0.0 if f_pde == f_mc else math.inf)
        good = abs(zs) <= n_se
        ok &= good
        rows.append((z, t, f_pde, f_mc, se, zs, good))
        print(f"z={z:+.3f} t={t:.3f}  pde={f_pde:.10f}  mc={f_mc:.10f} +- {se:.2e}  [{zs:+.2f} se]")
    write_rows(_out(cfg, "oracle.csv"), ["z", "t", "F_pde", "F_mc", "se", "z_score", "pass"], rows)
    return 0 if ok else 1


def cmd_verify(cfg: RunConfig):
    model, grid, sol = _solve(cfg)
    eps = cfg.tolerances["epsilon"]
    rep = game.verify_saddle_conditions(sol, model, n_scan=cfg.n_scan, epsilon=eps)
    mm = game.verify_lower_equals_upper(sol, model, n_scan=cfg.n_scan, epsilon=eps)
    rep.to_csv(_out(cfg, "verify_saddle.csv"))
    write_rows(_out(cfg, "verify_minimax.csv"), ["node", "x", "y", "z", "t", "minmax", "maxmin", "gap"],
               [(k, *s, a, b, g) for k, (s, a, b, g) in enumerate(zip(mm.states, mm.minmax, mm.maxmin, mm.gap))])
    w = rep.worst
    write_summary(_out(cfg, "verify_summary.csv"), [
        ("epsilon", rep.epsilon), *w.items(), ("saddle_pass", rep.passed),
        ("minmax_max_abs", float(np.max(np.abs(mm.minmax)))),
        ("maxmin_max_abs", float(np.max(np.abs(mm.maxmin)))),
        ("gap_max", float(np.max(mm.gap))), ("minimax_pass", mm.passed),
    ])
    print(f"saddle conditions: {'pass' if rep.passed else 'FAIL'} (eps {rep.epsilon:.1e}, "
          f"{len(rep.offending)} offending nodes)")
    print(f"lower = upper: {'pass' if mm.passed else 'FAIL'} (max gap {np.max(mm.gap):.2e})")
    return 0 if rep.passed and mm.passed else 1


def cmd_simulate(cfg: RunConfig):
    model, grid, sol = _solve(cfg)
    a = cfg.anchor
    n_se = cfg.tolerances["n_se"]
    fields = ControlFields(sol, model, a)
    saddle = sim.saddle_controls(fields)
    dW = sim.brownian_increments(cfg.mc, model.horizon_T - a.t0)
    # step-halving study on a shared Brownian path: N/4, N/2, N steps
    levels = [f for f in (4, 2) if cfg.mc.n_steps % f == 0]
    errs = []
    for f in levels:
        b = sim.simulate_system(model, sol, saddle, "Q", a.x0, a.y0, a.z0, a.t0, cfg.mc,
                                increments=sim.coarsen(dW, f))
        errs.append(sim.check_reduction_identity(b, sol, a)[0])
        del b
    bundle = sim.simulate_system(model, sol, saddle, "Q", a.x0, a.y0, a.z0, a.t0, cfg.mc, increments=dW)
    err, prof = sim.check_reduction_identity(bundle, sol, a)
    errs.append(err)
    write_rows(_out(cfg, "reduction_profile.csv"), ["t", "max_abs_error"], zip(bundle.times, prof))
    Jq, seq = sim.objective_from_terminal(bundle.X_T, bundle.Y_T, a.y0, "Q", cfg.mc.antithetic)
    del bundle
    bp = sim.simulate_system(model, sol, saddle, "P", a.x0, a.y0, a.z0, a.t0, cfg.mc, keep_paths=False)
    Jp, sep = sim.objective_from_terminal(bp.X_T, bp.Y_T, a.y0, "P", cfg.mc.antithetic)
    C, seC = sim.estimate_penalty(bp)
    mart, mse, mart_ok = sim.density_martingale_check(bp, n_se)
    cert = sim.certify_saddle_mc(model, sol, a, cfg=cfg.mc, n_se=n_se)
    write_rows(_out(cfg, "saddle_mc.csv"), ["label", "kind", "J", "se", "excess", "se_excess", "pass"],
               cert.rows)
    value = -a.x0 + fields.G_anchor * a.y0
    pq_ok = abs(Jq - Jp) <= n_se * math.hypot(seq, sep)
    monotone = all(e1 > e2 for e1, e2 in zip(errs, errs[1:])) or err == 0.0
    bound = cfg.tolerances["reduction_max"] if "reduction_max" in cfg.explicit_tolerances else math.inf
    reduction_ok = monotone and err <= bound
    write_summary(_out(cfg, "simulate_summary.csv"), [
        ("value", value), ("J_Q", Jq), ("se_Q", seq), ("J_P", Jp), ("se_P", sep),
        ("penalty", C), ("se_penalty", seC), ("density_mean", mart), ("se_density", mse),
        ("reduction_max_error", err),
        *((f"reduction_max_error_N/{f}", e) for f, e in zip(levels, errs)), ("sup_abs_xy_mean", bp.sup_abs_xy),
        ("saddle_pass", cert.passed), ("P_Q_agree", pq_ok), ("density_pass", mart_ok),
        ("reduction_pass", reduction_ok),
    ])
    print(f"J under Q {Jq:.6f} +- {seq:.1e}, under P {Jp:.6f} +- {sep:.1e}, value {value:.6f}")
    print(f"reduction identity max error {err:.3e}; saddle certificate "
          f"{'pass' if cert.passed else 'FAIL: ' + ', '.join(cert.violations)}")
    return 0 if cert.passed and pq_ok and mart_ok and reduction_ok else 1


def cmd_strategy(cfg: RunConfig, n_z=41, n_t=11):
    """Tabulate pi*, eta*, zeta and the reduced strategy over a (z, t) sub-grid."""
    model, grid, sol = _solve(cfg)
    a = cfg.anchor
    fields = ControlFields(sol, model, a)
    iz = np.unique(np.linspace(1, grid.n_z - 2, n_z).round().astype(int))
    it = np.unique(np.linspace(0, grid.n_t - 2, n_t).round().astype(int))
    rows = []
    for t in sol.times[it]:
        z = sol.z[iz]
        pi = optimal_pi(fields, a.y0, z, t)
        e1, e2 = optimal_eta(fields, z, t)
        ze = zeta(fields, z, t)
        rp = reduced_pi(fields, a.x0, z, t)
        rows.extend(zip(z, np.full(z.size, t), pi, e1, e2, ze, rp))
    write_rows(_out(cfg, "strategy.csv"), ["z", "t", "pi_star", "eta1_star", "eta2_star", "zeta",
                                           "reduced_pi"], rows)
    print(f"tabulated controls at {len(rows)} nodes (y = {a.y0:g}, x = {a.x0:g})")
    return 0


def _moments(cfg, model, sol):
    fam = model.family
    closed = cfg.mv_moments == "closed_form" or (cfg.mv_moments == "auto" and fam is not None
                                                 and fam.kind == "constant")
    if closed:
        lam = float(model.lam(0.0))
        ER, ER2, VarR = meanvar.bs_closed_form(lam, model.horizon_T)
        return meanvar.RMoments(ER, ER2, VarR, 0.0, 0.0, 0.0)
    return meanvar.simulate_R(model, sol, cfg.anchor.z0, cfg.mc, cfg.anchor.t0)


def compare_rows(sol, model, anchor, theta, moments, n_z=9, n_t=5, x=None):
    """(z, t, monotone_pi, mv_pi, ratio) on a coarse sub-grid of nodes at wealth ``x``."""
    x = anchor.x0 if x is None else x
    fields = ControlFields(sol, model, anchor)
    g = sol.grid
    iz = np.unique(np.linspace(1, g.n_z - 2, n_z).round().astype(int))
    it = np.unique(np.linspace(0, g.n_t - 2, n_t).round().astype(int))
    rows = []
    for t in sol.times[it]:
        for z in sol.z[iz]:
            mono = reduced_pi(fields, x, z, t)
            mv = meanvar.mv_strategy(sol, model, x, z, t, anchor.x0, anchor.z0, theta,
                                     moments.ER, moments.VarR)
            rows.append((float(z), float(t), mono, mv, mv / mono if mono != 0 else math.nan))
    return rows


def cmd_compare_mv(cfg: RunConfig):
    model, grid, sol = _solve(cfg)
    a = cfg.anchor
    m = _moments(cfg, model, sol)
    try:
        theta = cfg.theta if cfg.theta is not None else meanvar.theta_equivalence(sol, a, m.ER, m.VarR)
        mvs = meanvar.mean_variance_solution(sol, a, theta, m)
    except (DegenerateER, DegenerateVariance) as exc:
        write_summary(_out(cfg, "compare_mv_summary.csv"),
                      [("ER", m.ER), ("VarR", m.VarR), ("error", type(exc).__name__)])
        print(f"mean-variance comparison undefined: {type(exc).__name__}: {exc}")
        return 1
    rows = compare_rows(sol, model, a, theta, m)
    write_rows(_out(cfg, "compare_mv.csv"), ["z", "t", "monotone_pi", "mv_pi", "ratio"], rows)
    ratios = np.array([r[4] for r in rows if not math.isnan(r[4])])
    dev = float(np.max(np.abs(ratios - ratios[0]))) if ratios.size else 0.0
    write_summary(_out(cfg, "compare_mv_summary.csv"), [
        ("ER", m.ER), ("se_ER", m.se_ER), ("ER2", m.ER2), ("VarR", m.VarR), ("se_VarR", m.se_VarR),
        ("A_star", mvs.A_star), ("gamma_star", mvs.gamma_star), ("theta", theta),
        ("phi_second_moment", mvs.phi_second_moment), ("intercept", mvs.strategy_intercept),
        ("ratio_max_dev", dev),
    ])
    print(f"ER {m.ER:.6f}  VarR {m.VarR:.6f}  theta {theta:.10g}  A* {mvs.A_star:.6f}  "
          f"gamma* {mvs.gamma_star:.6f}")
    tol = cfg.tolerances["ratio_rel"]
    if cfg.theta is None:
        ok = ratios.size > 0 and float(np.max(np.abs(ratios - 1.0))) <= tol
    else:
        ok = dev <= tol * max(1.0, abs(ratios[0])) if ratios.size else True
    print(f"strategy ratio {'constant' if ok else 'NOT constant'} (max deviation {dev:.2e})")
    return 0 if ok else 1


def cmd_example_bs(cfg: RunConfig | None, lam=0.4, sigma=0.2, horizon_T=1.0):
    """Black-Scholes pipeline: solve, closed-form moments, theta = 1/(4 y0) check."""
    y0 = cfg.anchor.y0 if cfg else 0.5
    x0 = cfg.anchor.x0 if cfg else 1.0
    anchor = Anchor(x0, y0, 0.0, 0.0)
    model = black_scholes(lam, sigma, horizon_T=horizon_T)
    # a fine time step keeps the surface error well below the 1e-10 theta check
    grid = pde.GridSpec(-1.0, 1.0, 41, 4001)
    sol = pde.solve(model, grid)
    ER, ER2, VarR = meanvar.bs_closed_form(lam, horizon_T)
    m = meanvar.RMoments(ER, ER2, VarR, 0.0, 0.0, 0.0)
    theta = meanvar.theta_equivalence(sol, anchor, ER, VarR)
    target = 1.0 / (4.0 * y0)
    G0 = float(sol.interp(0.0, 0.0, fields=1)[0])
    rows = compare_rows(sol, model, anchor, theta, m)
    rel = max(abs(r[3] - r[2]) / abs(r[2]) for r in rows)
    ok = abs(theta - target) <= (cfg.tolerances["theta_abs"] if cfg else 1e-10) and rel <= 1e-6
    print(f"G(0,0) = {G0:.12f}   exact {-math.exp(lam * lam * horizon_T):.12f}")
    print(f"theta = {theta:.12f}   1/(4 y0) = {target:.12f}   diff {theta - target:.2e}")
    print(f"max relative strategy difference {rel:.2e}: {'pass' if ok else 'FAIL'}")
    if cfg is not None:
        write_rows(_out(cfg, "example_bs.csv"), ["z", "t", "monotone_pi", "mv_pi", "ratio"], rows)
        write_summary(_out(cfg, "example_bs_summary.csv"), [
            ("G0", G0), ("theta", theta), ("theta_target", target), ("max_rel_diff", rel), ("pass", ok)])
    return 0 if ok else 1


COMMANDS = {
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "compare-mv": cmd_compare_mv,
    "strategy": cmd_strategy,
    "example-bs": cmd_example_bs,
}


def build_parser():
    p = argparse.ArgumentParser(prog="mmvgame", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    p.add_argument("--seed", type=int, help="override mc.seed (unsigned 64-bit)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("command", choices=sorted(COMMANDS))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config is None:
            if args.command != "example-bs":
                raise ConfigError("--config", "required for this subcommand")
            cfg = None
        else:
            cfg = load_config(args.config)
        if cfg is not None:
            if args.seed is not None:
                if not 0 <= args.seed < 2 ** 64:
                    raise ConfigError("--seed", "must be an unsigned 64-bit integer")
                cfg.with_seed(args.seed)
            out = args.out or os.environ.get(OUT_ENV) or cfg.output_dir
            cfg.output_dir = out
            os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except MmvError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmvgame import model as M
from mmvgame import pde
from mmvgame.csvio import surface_table
from mmvgame.errors import GridTooCoarse, NonPositiveF, OutOfDomain

E16 = math.exp(0.16)
SMALL = pde.GridSpec(-1.0, 1.0, 21, 101)
REFERENCE = pde.GridSpec(-6.0, 6.0, 401, 401)

# Independent references: method of lines on [-7, 7] with 1401 nodes, a
# fourth-order z stencil and scipy's BDF integrator (rtol 1e-11).
MOL_F = {
    (0.0, 0.0, 0.0): 0.9134305493268062,
    (0.0, 0.6, 0.0): 0.8939169649762625,
    (0.0, -0.6, 0.25): 0.9494600159263232,
    (0.0, 0.9, 0.5): 0.9375064855298821,
    (0.5, 0.0, 0.0): 0.9571602257615445,
    (0.5, 0.6, 0.0): 0.9470708557158998,
    (0.5, -0.6, 0.25): 0.9750112500284478,
    (0.5, 0.9, 0.5): 0.9686879695590385,
    (2 ** -0.5, 0.0, 0.0): 0.08639232184955982,
    (2 ** -0.5, 0.6, 0.0): 0.10739282125857877,
    (2 ** -0.5, -0.6, 0.25): 0.05012178886402198,
    (2 ** -0.5, 0.9, 0.5): 0.06324575631931051,
}


def _node(sol, z, t):
    return int(round((z - sol.grid.z_lo) / sol.grid.dz)), int(round(t / sol.dt))


def test_gridspec_validation():
    with pytest.raises(ValueError):
        pde.GridSpec(1.0, 0.0, 11, 11)
    with pytest.raises(ValueError):
        pde.GridSpec(0.0, 1.0, 3, 11)
    with pytest.raises(ValueError):
        pde.GridSpec(0.0, 1.0, 11, 1)
    g = pde.GridSpec(-1.0, 1.0, 5, 3)
    assert g.dz == 0.5 and g.dt(2.0) == 1.0
    np.testing.assert_allclose(g.z, [-1, -0.5, 0, 0.5, 1])


def test_default_grid_is_six_stationary_sd():
    g = pde.default_grid(M.ou_tanh(kappa=1.0, beta=0.5))
    sd = 0.5 / math.sqrt(2.0)
    assert g.z_hi == pytest.approx(6 * sd) and g.z_lo == pytest.approx(-6 * sd)
    assert (g.n_z, g.n_t) == (401, 401)


def test_case_selection():
    assert pde.case_for(0.5).kind == "I"
    assert pde.case_for(0.5).alpha == pytest.approx(1 / (2 * 0.25 - 1))
    assert pde.case_for(2 ** -0.5).kind == "II"
    assert pde.case_for(-(2 ** -0.5)).kind == "II"
    assert pde.case_for(math.sqrt(0.5 + 1e-4)).kind == "I"
    with pytest.raises(ValueError):
        pde.solve_case1(M.ou_tanh(rho=2 ** -0.5), SMALL)
    with pytest.raises(ValueError):
        pde.solve_case2(M.ou_tanh(rho=0.0), SMALL)


@pytest.mark.parametrize("rho", [0.0, 0.5, 2 ** -0.5, -(2 ** -0.5), -0.9])
def test_zero_lambda_gives_flat_surface(rho):
    m = M.constant_coefficients(0.02, 0.2, r=0.02, rho=rho)
    sol = pde.solve(m, SMALL)
    # Crank-Nicolson reproduces a constant only up to rounding in the band sums
    np.testing.assert_allclose(sol.G, -1.0, rtol=0, atol=1e-12)
    np.testing.assert_allclose(sol.G_z, 0.0, rtol=0, atol=1e-10)
    np.testing.assert_allclose(sol.F, 1.0 if sol.case_tag.kind == "I" else 0.0, rtol=0, atol=1e-12)
    assert pde.residual_resulting_equation(sol, m).max_norm < 1e-9


def test_black_scholes_linear_solutions():
    F1 = pde.solve_case1(M.black_scholes(0.4, 0.2, rho=0.0), pde.GridSpec(-1, 1, 21, 401))
    np.testing.assert_allclose(F1[:, 0], math.exp(-0.16), rtol=1e-6)
    F2 = pde.solve_case2(M.black_scholes(0.4, 0.2, rho=2 ** -0.5), pde.GridSpec(-1, 1, 21, 401))
    np.testing.assert_allclose(F2[:, 0], 0.16, rtol=1e-12)


@pytest.mark.parametrize("rho", [0.0, 0.3, 2 ** -0.5, -(2 ** -0.5), 0.95])
def test_black_scholes_G_is_exact_for_any_case(rho):
    sol = pde.solve(M.black_scholes(0.4, 0.2, rho=rho), pde.GridSpec(-1, 1, 21, 401))
    np.testing.assert_allclose(sol.G[:, 0], -E16, rtol=1e-6)
    assert np.all(sol.G[:, -1] == -1.0)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(-0.6, 0.6), rho=st.floats(-1.0, 1.0), T=st.floats(0.1, 2.0))
def test_constant_lambda_closed_form(lam, rho, T):
    sol = pde.solve(M.black_scholes(lam, 0.2, rho=rho, horizon_T=T), pde.GridSpec(-1, 1, 9, 201))
    tt = sol.times
    np.testing.assert_allclose(sol.G, -np.exp(lam * lam * (T - tt))[None, :].repeat(9, 0), rtol=2e-6)


def test_terminal_row_and_sign_and_bounds(ou_by_rho):
    lam_max = 0.4
    for rho, (m, sol) in ou_by_rho.items():
        assert np.all(sol.G[:, -1] == -1.0)
        assert np.all(sol.G < 0)
        tau = m.horizon_T - sol.times
        assert np.all(-sol.G <= np.exp(lam_max ** 2 * tau)[None, :] * (1 + 1e-12))
        assert np.all(-sol.G >= np.exp(-lam_max ** 2 * tau)[None, :] * (1 - 1e-12))
        G, Gz = pde.eval_G(sol, 0.3, m.horizon_T)
        assert G == -1.0 and Gz == 0.0


@pytest.mark.parametrize("key", sorted(MOL_F))
def test_linear_solution_matches_method_of_lines(ou_by_rho, key):
    rho, z, t = key
    m, sol = ou_by_rho[min(ou_by_rho, key=lambda r: abs(r - rho))]
    i, k = _node(sol, z, t)
    # O(dz^2 + dt^2) at dz = 0.03, dt = 0.0025
    assert sol.F[i, k] == pytest.approx(MOL_F[key], abs=3e-6)


def test_discrepancy_to_method_of_lines_is_second_order():
    errs = {}
    for n in (401, 801):
        g = pde.GridSpec(-6.0, 6.0, n, n)
        sols = {rho: pde.solve(M.ou_tanh(rho=rho), g) for rho in (0.0, 0.5, 2 ** -0.5)}
        errs[n] = [abs(sols[rho].F[_node(sols[rho], z, t)] - v) for (rho, z, t), v in MOL_F.items()]
    for e1, e2 in zip(errs[401], errs[801]):
        assert e2 <= e1 / 3.0 or e1 < 1e-8


def test_case_continuity_near_switch(ou):
    base = M.ou_tanh()
    g = REFERENCE
    s2 = pde.solve(M.with_rho(base, 2 ** -0.5), g)
    for r2 in (0.5 - 1e-4, 0.5 + 1e-4):
        s1 = pde.solve(M.with_rho(base, math.sqrt(r2)), g)
        assert s1.case_tag.kind == "I"
        np.testing.assert_allclose(s1.G[:, 0], s2.G[:, 0], rtol=1e-3)


def test_residual_second_order_under_refinement():
    m = M.ou_tanh(rho=0.5)
    norms = []
    for n in (401, 801):
        g = pde.GridSpec(-6.0, 6.0, n, n)
        norms.append(pde.residual_resulting_equation(pde.solve(m, g), m).max_norm)
    assert norms[0] < 1e-4
    assert norms[0] / norms[1] >= 3.0


def test_Gz_bounded_under_refinement():
    m = M.ou_tanh(rho=0.5)
    mx = [float(np.max(np.abs(pde.solve(m, pde.GridSpec(-6.0, 6.0, n, 201)).G_z))) for n in (201, 401, 801)]
    assert mx[2] <= mx[1] * 1.01 and mx[1] <= mx[0] * 1.01


def test_eval_G_interpolation(ou):
    m, sol = ou
    i, k = 150, 40
    G, Gz = pde.eval_G(sol, sol.z[i], sol.times[k])
    assert G == sol.G[i, k] and Gz == sol.G_z[i, k]
    zm = 0.5 * (sol.z[i] + sol.z[i + 1])
    G, _ = pde.eval_G(sol, zm, sol.times[k])
    assert G == pytest.approx(0.5 * (sol.G[i, k] + sol.G[i + 1, k]), abs=1e-15)
    with pytest.raises(OutOfDomain):
        pde.eval_G(sol, sol.grid.z_hi + 0.1, 0.0)
    with pytest.raises(OutOfDomain):
        pde.eval_G(sol, 0.0, -0.1)


def test_grid_too_coarse_and_nonpositive_F():
    m = M.ou_tanh(rho=0.5, beta=0.05)
    with pytest.raises(GridTooCoarse):
        pde.solve_case1(m, pde.GridSpec(-3, 3, 7, 3), residual_tol=1e-8)
    with pytest.raises(NonPositiveF):
        pde.assemble_G(np.zeros((5, 3)), pde.case_for(0.0), m, pde.GridSpec(-1, 1, 5, 3))


def test_surface_table_columns(ou):
    m, sol = ou
    res = pde.residual_resulting_equation(sol, m)
    header, table = surface_table(sol, res.values)
    assert header == ["t", "z", "G", "G_z", "F", "residual"]
    assert table.shape == (sol.G.size, 6)
    assert table[0, 0] == 0.0 and table[0, 1] == sol.grid.z_lo and table[0, 2] == sol.G[0, 0]
    assert np.isnan(table[0, 5])

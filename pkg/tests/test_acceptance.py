"""The ten acceptance criteria at their stated tolerances, one test each.

Every test records a single PASS/FAIL line (shown in the terminal summary
and printed under ``-s``) before asserting.
"""

import json

import numpy as np
import yaml
from conftest import ACCEPTANCE_LINES, run_cli
from oracles import Jordan72, Scalar71

from canonsys.canonical import fundamental_solution_oracle, make_beta_exponential
from canonsys.dynamical import dynamical_solution, simplification_residual, verify_dynamical_pde
from canonsys.gbdt import beta_tilde, build_seed, darboux_matrix_v, gbdt_state, transformed_hamiltonian, transformed_W_at, v0_inverse
from canonsys.initial import initial_params, initial_W
from canonsys.linalg import Grid, norm
from canonsys.schrodinger import (
    canonical_to_string,
    kappa_selfadjoint_defect,
    schrodinger_to_canonical,
    verify_schrodinger_solution,
)
from canonsys.scenario import read_scenario_text
from canonsys.volterra import transfer_function_wA_ell
from canonsys.weyl import semi_radii_monotone, verify_L2_membership, weyl_disk_from_W, weyl_function_explicit


def record(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def unitary(p, angle):
    if p == 1:
        return np.array([[np.exp(1j * angle)]])
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 1j * s], [1j * s, c]])


def oracle71(seed):
    return Scalar71(1 + 1j, 1.0, 1.0, 1.0, 0.3, seed.Q[0, 0])


def test_criterion_01_gbdt_identity(state71, state72):
    worst = max(state71.identity_residuals().max(), state72.identity_residuals().max())
    nodes = (state71.grid.nodes, state72.grid.nodes)
    record(1, "GBDT identity at every node", worst <= 1e-8 and nodes == (2001, 2001), f"max relative residual {worst:.2e} <= 1e-8")


def test_criterion_02_closed_forms(seed71, state71, seed72, state72, state71_long):
    o71 = oracle71(seed71)
    o72 = Jordan72(1.0, seed72.A[0, 1], 1.0, 1.0, 1.0, 1.0, seed72.S0)
    s_err = max(
        max(abs(S[0, 0] - o71.S(x)) for S, x in zip(state71.S.values, state71.grid.points)),
        max(norm(S - o72.S(x)) for S, x in zip(state72.S.values, state72.grid.points)),
    )
    xs = state71.grid.points[::50]
    b_err = max(
        max(norm(beta_tilde(state71, x) - o71.beta_tilde(x)) for x in xs),
        max(norm(beta_tilde(state72, x) - o72.beta_tilde(x)) for x in xs),
    )
    lams = [1j, 1 + 2j, -0.5 + 2j, 2j]
    v_err = max(norm(darboux_matrix_v(state71, x, lam) - o71.v(x, lam)) for x in xs for lam in lams)
    phi = weyl_function_explicit(state71_long)
    S0 = seed71.S0[0, 0].real
    phi_err = max(abs(phi(lam)[0, 0] - o71.weyl(lam, S0)) for lam in (1j, 1 + 1j, -0.5 + 2j))
    ok = s_err <= 1e-7 and b_err <= 1e-7 and v_err <= 1e-9 and phi_err <= 1e-9
    record(2, "closed forms", ok, f"S {s_err:.1e}, beta~ {b_err:.1e}, v {v_err:.1e}, phi {phi_err:.1e}")


def test_criterion_03_explicit_initial_solution():
    worst = 0.0
    for c in (1.0, 0.5):
        for p in (1, 2):
            alpha = unitary(p, 0.3)
            spec = make_beta_exponential(c, 0.0, alpha)
            for lam in (1j, 1 + 2j, -0.5 + 1j):
                oracle = fundamental_solution_oracle(spec, lam, Grid.on(1.0, 1001)).values[-1]
                worst = max(worst, norm(initial_W(initial_params(c, alpha, lam), 1.0) - oracle))
    record(3, "explicit initial solution vs RK4 oracle", worst <= 1e-6, f"max distance {worst:.2e} <= 1e-6")


def test_criterion_04_transformed_system(state71, state72):
    ode = dist = 0.0
    h = 1e-4
    for state in (state71, state72):
        tilde = transformed_hamiltonian(state)
        j = state.seed.j
        for lam in (1j, 1 + 2j, -0.5 + 2j):
            v0inv = v0_inverse(state, lam)
            W = lambda x: transformed_W_at(state, lam, x, v0inv)
            for x in (0.25, 0.5, 1.0, 1.5):
                deriv = (W(x + h) - W(x - h)) / (2 * h)
                ode = max(ode, norm(deriv - 1j * lam * j @ tilde.H(x) @ W(x)))
            oracle = fundamental_solution_oracle(tilde, lam, Grid.on(1.0, 1001)).values[-1]
            dist = max(dist, norm(W(1.0) - oracle))
    ok = ode <= 1e-5 and dist <= 1e-5
    record(4, "transformed fundamental solution", ok, f"ODE residual {ode:.1e}, oracle distance {dist:.1e} <= 1e-5")


def test_criterion_05_structure(state71, state72):
    jbj = 0.0
    for state in (state71, state72):
        j = state.seed.j
        jbj = max(jbj, max(norm(b @ j @ b.conj().T) for b in (beta_tilde(state, x) for x in state.grid.points)))
    seed = build_seed([[1 + 1j]], [[1.0]], [[0.3]], [[1.0]], c=0.5, q_branch="lower")
    half = gbdt_state(seed, Grid.on(2.0, 2001))
    h = 1e-4
    deriv = 0.0
    for x in np.linspace(0.1, 1.9, 19):
        b = beta_tilde(half, x)
        db = (beta_tilde(half, x + h) - beta_tilde(half, x - h)) / (2 * h)
        deriv = max(deriv, norm(db @ seed.j @ b.conj().T - 1j * np.eye(1)))
    ok = jbj <= 1e-10 and deriv <= 1e-6
    record(5, "structure preservation", ok, f"beta~ j beta~* {jbj:.1e} <= 1e-10, c=1/2 derivative form {deriv:.1e} <= 1e-6")


def test_criterion_06_weyl_theory(state71_long):
    lam = 1j
    f = weyl_function_explicit(state71_long)(lam)
    v0inv = v0_inverse(state71_long, lam)
    W = lambda x: transformed_W_at(state71_long, lam, x, v0inv)
    disks = [weyl_disk_from_W(W(r), lam, r) for r in (0.5, 1.0, 2.0, 5.0)]
    member = min(d.membership(f) for d in disks)
    increase = semi_radii_monotone(disks)
    l2 = verify_L2_membership(transformed_hamiltonian(state71_long), W, f, lam, [1.0, 2.0, 4.0])
    excess = max(l2.max_eigenvalues) - l2.bound
    ok = member >= -1e-8 and increase <= 1e-8 and excess <= 1e-6
    record(6, "Weyl disks and L2 bound", ok, f"membership {member:.1e} >= -1e-8, radius increase {increase:.1e}, L2 excess {excess:.2f}")


def test_criterion_07_volterra(volterra_half):
    spec, runs = volterra_half
    errs, ratios = [], []
    for lam in (1j, 2j):
        W = fundamental_solution_oracle(spec, lam, Grid.on(1.0, 1001)).values[-1]
        e400, e800 = (norm(W - transfer_function_wA_ell(k, a, 1.0, 1 / lam)) for a, k in (runs[400], runs[800]))
        errs.append(e400)
        ratios.append(e400 / e800)
    ker = runs[400][1]
    ok = max(errs) <= 5e-3 and min(ratios) >= 3 and ker.tail_bound < 1e-8 and ker.terms <= 12
    detail = f"error {max(errs):.1e} <= 5e-3, ratio {min(ratios):.2f} >= 3, tail {ker.tail_bound:.1e} with {ker.terms} terms"
    record(7, "Volterra similarity transfer function", ok, detail)


def test_criterion_08_string_schrodinger(state71_sylvester):
    j1 = res = 0.0
    for p in (1, 2):
        data = schrodinger_to_canonical(lambda x: -0.25 * np.eye(p), Grid.on(2.0, 2001))
        j1 = max(j1, data.J1_defects().max())
        for lam in (1.0, 1j):
            res = max(res, verify_schrodinger_solution(data, lam))
    kappa = 0.0
    for spec, grid in (
        (make_beta_exponential(1.0, 0.0, -1.0), Grid.on(1.0, 401)),
        (transformed_hamiltonian(state71_sylvester), Grid(0.3, 2.0, 1701)),
    ):
        kappa = max(kappa, kappa_selfadjoint_defect(canonical_to_string(spec, grid, strict=True)))
    ok = j1 <= 1e-9 and res <= 1e-4 and kappa <= 1e-10
    record(8, "string and Schrodinger forms", ok, f"J1 {j1:.1e} <= 1e-9, residual {res:.1e} <= 1e-4, kappa {kappa:.1e} <= 1e-10")


def test_criterion_09_dynamical(state71, state72):
    orders, simp = [], 0.0
    for state in (state71, state72):
        rep = verify_dynamical_pde(dynamical_solution(state), [0.5, 1.0, 1.5], [0.3, 0.7], step=1e-2, halvings=2)
        orders += list(rep.orders)
        simp = max(simp, max(simplification_residual(state, x) for x in state.grid.points[::20]))
    dev = max(abs(o - 2.0) for o in orders)
    ok = dev <= 0.3 and simp <= 1e-9
    record(9, "dynamical system", ok, f"orders {', '.join(f'{o:.3f}' for o in orders)}, simplification {simp:.1e} <= 1e-9")


def test_criterion_10_determinism_and_exit_codes(bundled_71_runs, tmp_path):
    first, second = bundled_71_runs
    same = all(
        (first["out"] / n).read_bytes() == (second["out"] / n).read_bytes()
        for n in ("report.json", "H_tilde.csv", "weyl_phi.csv")
    )
    codes = {"ok": first["code"]}
    base = yaml.safe_load(read_scenario_text("example_7_2"))
    base.update(stages=["build"], emit=[], grid={"length": 2.0, "nodes": 201})
    tight = dict(base, tolerances={"build.identity_relative": 1e-30})
    (tmp_path / "tight.yaml").write_text(yaml.safe_dump(tight), encoding="utf-8")
    codes["check"] = run_cli(["run", tmp_path / "tight.yaml", "--out", tmp_path / "t"])[0]
    (tmp_path / "corrupt.yaml").write_text(read_scenario_text("example_7_2")[:120] + "\n: [", encoding="utf-8")
    codes["parse"] = run_cli(["run", tmp_path / "corrupt.yaml", "--out", tmp_path / "c"])[0]
    upper = yaml.safe_load(read_scenario_text("example_7_1"))
    upper["system"]["q_branch"] = "upper"
    (tmp_path / "upper.yaml").write_text(yaml.safe_dump(upper), encoding="utf-8")
    code, _, err = run_cli(["run", tmp_path / "upper.yaml", "--out", tmp_path / "u"])
    codes["precondition"] = code
    expected = {"ok": 0, "check": 1, "parse": 2, "precondition": 3}
    status = json.loads((first["out"] / "report.json").read_text())["status"]
    ok = same and codes == expected and status == "pass" and "positivity inequality" in err
    record(10, "determinism and exit codes", ok, f"byte-identical {same}, exit codes {codes}")

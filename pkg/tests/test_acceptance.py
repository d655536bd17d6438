"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the verdict lines.
Every threshold below is the criterion's own tolerance.
"""

import json
import math

import numpy as np
import pytest

from peeldyn.cli.main import SCENARIO_DIR, main, run_scenario
from peeldyn.cli.scenario import load_scenario
from peeldyn.dalembert import SampledFunction, build_parts, eval_A, transform_data
from peeldyn.duhamel import Lattice, picard_solve_window, solve_prescribed, solve_u_route
from peeldyn.energy import release_rate_Galpha
from peeldyn.geometry import CharMaps, Front
from peeldyn.griffith import (NON_LIPSCHITZ_DIAGNOSIS, coupled_solve, front_ode_rhs,
                              lambda_route_speed, verify_solution_pair)
from peeldyn.oracle import FdmGrid, compare_fields, fdm_solve_prescribed

from conftest import make_data, sine

DELTA = 1e-3


def verdict(n: int, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    return ok


def _scenario(name, tmp_path, **kw):
    return load_scenario(SCENARIO_DIR / f"{name}.scn").with_overrides(out=tmp_path / name, **kw)


def _random_smooth(rng, modes=4):
    """Sine series with decaying random amplitudes (compatible with a fixed zero boundary)."""
    a = rng.normal(size=modes) / (1.0 + np.arange(modes)) ** 2
    k = np.arange(1, modes + 1)

    def f(x):
        return np.sin(math.pi * np.multiply.outer(x, k)) @ a

    def df(x):
        return (math.pi * k * np.cos(math.pi * np.multiply.outer(x, k))) @ a

    return SampledFunction.from_callable(f, 0.0, 1.0, 4000, dfunc=df)


def test_criterion_01_undamped_single_iteration():
    front = Front.constant(1.0, 1.0)
    maps = CharMaps(front)
    vd = transform_data(make_data(u0=sine(), u1=sine(k=2)))
    lat = Lattice.build(DELTA, 0.0, 0.25, front)
    sol, rep = picard_solve_window(vd, maps, lat)
    parts = build_parts(vd, maps)
    t = 0.5 * (sol.node_xi + sol.node_eta)
    x = 0.5 * (sol.node_eta - sol.node_xi)
    err = float(np.max(np.abs(sol.V.ravel()[sol.fi] - eval_A(parts, maps, t, x))))
    ok = rep.iterations == 1 and err <= 1e-12
    assert verdict(1, ok, f"iterations={rep.iterations}, max |V - A| = {err:.3e} (<= 1e-12)")


def test_criterion_02_contraction_rate():
    rng = np.random.default_rng(20261015)
    front = Front.constant(1.0, 1.0)
    maps = CharMaps(front)
    lat = Lattice.build(DELTA, 0.0, 0.25, front)
    worst = 0.0
    for _ in range(5):
        d = make_data(nu=2.0, u0=_random_smooth(rng), u1=_random_smooth(rng))
        _, rep = picard_solve_window(transform_data(d), maps, lat, tol=1e-13)
        inc = [v for v in rep.increments if v > 0]
        ratios = [b / a for a, b in zip(inc[1:-1], inc[2:])]
        worst = max([worst] + ratios)
    assert verdict(2, worst <= 0.30, f"largest increment ratio past the first iterate = {worst:.4f} (<= 0.30)")


@pytest.mark.parametrize("nu", [0.0, 1.0, 2.0])
def test_criterion_03_oracle_agreement(nu):
    d = make_data(nu=nu, u0=sine())
    front = Front.affine(1.0, 0.3, 1.0)
    l2 = []
    for h in (DELTA, DELTA / 2):
        wf, _ = solve_prescribed(d, front, h, 0.4)
        res = fdm_solve_prescribed(d, front, FdmGrid(h), 0.4)
        l2.append(compare_fields(wf, res, [0.4])[0].l2)
        del wf, res
    ratio = l2[0] / l2[1]
    ok = l2[0] <= 5e-3 and ratio >= 1.5
    assert verdict(3, ok, f"nu={nu:g}: L2 = {l2[0]:.3e} (<= 5e-3), halving ratio {ratio:.2f} (>= 1.5)")


def test_criterion_04_standing_wave():
    wf, _ = solve_prescribed(make_data(u0=sine()), Front.constant(1.0, 1.0), DELTA, 0.5)
    t = np.linspace(0, 0.5, 51)[:, None] * np.ones((1, 101))
    x = np.linspace(0, 1, 101)[None, :] * np.ones((51, 1))
    err = float(np.max(np.abs(wf.u(t, x) - np.sin(math.pi * x) * np.cos(math.pi * t))))
    assert verdict(4, err <= 1e-4, f"sup error = {err:.3e} (<= 1e-4)")


def test_criterion_05_energy_balance(tmp_path):
    res = []
    for d in (DELTA, DELTA / 2):
        sc = _scenario("constant_speed_peel", tmp_path, delta=d)
        out = coupled_solve(sc.problem_data(), sc.toughness_model(), d, sc.horizon)
        res.append((out.trace.max_residual(), float(out.trace.T_total[0])))
        del out
    (r1, T0), (r2, _) = res
    ratio = r1 / r2
    ok = r1 <= 1e-3 * T0 and ratio >= 1.7
    assert verdict(5, ok, f"max residual {r1:.3e} (<= {1e-3 * T0:.1e}), halving ratio {ratio:.2f} (>= 1.7)")


def test_criterion_06_constant_speed_front(tmp_path):
    sc = _scenario("constant_speed_peel", tmp_path)
    kappa = sc.toughness_model()
    out = coupled_solve(sc.problem_data(), kappa, DELTA, sc.horizon)
    rep = out.report
    speed_err = float(np.max(np.abs(rep.speed - 0.6)))
    exact = float(front_ode_rhs(2.0, 0.5))
    lam = lambda_route_speed(out, kappa, rep.times)
    ode = front_ode_rhs(rep.G0, rep.kappa)
    rel = float(np.max(np.abs(lam - ode) / np.abs(ode)))
    ok = speed_err <= 1e-3 and rel <= 1e-8 and exact == pytest.approx(0.6, abs=1e-15)
    assert verdict(6, ok, f"max |speed - 3/5| = {speed_err:.3e} (<= 1e-3), "
                          f"route mismatch {rel:.2e} relative (<= 1e-8)")


@pytest.mark.parametrize("name", ["constant_speed_peel", "threshold_stationary", "forced_peel",
                                  "time_dependent_kappa"])
def test_criterion_07_griffith_kkt(name, tmp_path):
    sc = _scenario(name, tmp_path)
    outcome = run_scenario(sc)
    g = outcome.griffith
    kmin = sc.toughness_model().bounds[0]
    ok = outcome.code == 0 and g.max_violation <= 1e-2 * kmin and g.max_complementarity <= 1e-2 * kmin
    assert verdict(7, ok, f"{name}: violation {g.max_violation:.2e}, complementarity "
                          f"{g.max_complementarity:.2e} (<= {1e-2 * kmin:.1e})")


def test_criterion_08_threshold_stationarity(tmp_path):
    sc = _scenario("threshold_stationary", tmp_path)
    out = coupled_solve(sc.problem_data(), sc.toughness_model(), DELTA, sc.horizon)
    ok = bool(np.all(out.front.ell == sc.ell0) and np.all(out.front.slopes == 0.0))
    assert verdict(8, ok, f"front knots {out.front.ell.size}, max |ell - ell0| = "
                          f"{np.max(np.abs(out.front.ell - sc.ell0)):.1e}, max slope {np.max(out.front.slopes):.1e}")


def test_criterion_09_non_uniqueness(tmp_path):
    sc = _scenario("sqrt_toughness", tmp_path)
    data, kappa = sc.problem_data(), sc.toughness_model()
    worst = {}
    accepted = True
    for label, f in (("stationary", Front.constant(1.0, 0.6)),
                     ("quadratic", Front.from_function(lambda t: 1 + t * t / 4, 0.6, 600))):
        wf, _ = solve_prescribed(data, f, DELTA, sc.horizon)
        rep = verify_solution_pair(wf, f, data, kappa, DELTA, tol=1e-2)
        accepted &= rep.accepted
        worst[label] = max(rep.residuals.values())
    out = coupled_solve(data, kappa, DELTA, sc.horizon)
    diag = NON_LIPSCHITZ_DIAGNOSIS in out.report.diagnoses
    ok = accepted and diag
    assert verdict(9, ok, f"largest residuals {', '.join(f'{k} {v:.2e}' for k, v in worst.items())} "
                          f"(<= 1e-2), diagnosis emitted: {diag}")


def test_criterion_10_non_existence(tmp_path, capsys):
    code = main(["run", "pointwise_kappa", "--out", str(tmp_path)])
    err = capsys.readouterr().err
    rep = json.loads((tmp_path / "report.json").read_text())
    windows = rep.get("windows_attempted")
    ok = code == 3 and "oscillation" in err and windows is not None and windows <= 10
    assert verdict(10, ok, f"exit code {code}, oscillation diagnosis: {'oscillation' in err}, "
                           f"stopped in window {windows} (<= 10)")


def test_criterion_11_transform_equivalence():
    d = make_data(nu=2.0, u0=sine())
    f = Front.constant(1.0, 1.0)
    a, _ = solve_prescribed(d, f, DELTA, 0.5)
    b, _ = solve_u_route(d, f, DELTA, 0.5)
    t = np.linspace(0, 0.5, 26)[:, None] * np.ones((1, 51))
    x = np.linspace(0, 1, 51)[None, :] * np.ones((26, 1))
    err = float(np.max(np.abs(a.u(t, x) - b.u(t, x))))
    assert verdict(11, err <= 5e-3, f"sup |u_v - u_u| = {err:.3e} (<= 5e-3)")


def test_criterion_12_release_rate_structure():
    rng = np.random.default_rng(12)
    G0 = rng.uniform(0.0, 10.0, 1000)
    alpha = rng.uniform(0.0, 1.0, 1000)
    G = release_rate_Galpha(G0, alpha)
    exact = (1 - alpha) / (1 + alpha) * G0
    err = float(np.max(np.abs(G - exact) / np.maximum(np.abs(exact), 1e-300)))
    a_sorted = np.sort(rng.uniform(0.0, 1.0, 200))
    a_sorted = a_sorted[np.diff(a_sorted, prepend=-1) > 0]
    mono = all(bool(np.all(np.diff(release_rate_Galpha(g, a_sorted)) < 0)) for g in G0[G0 > 0][:50])
    near = float(np.max(release_rate_Galpha(G0, 1 - 1e-12)))
    ok = err <= 4 * np.finfo(float).eps and mono and near <= 1e-10
    assert verdict(12, ok, f"max relative error {err:.1e}, strictly decreasing: {mono}, "
                           f"max G at alpha=1-1e-12: {near:.1e}")


def test_criterion_13_forcing_extension(tmp_path):
    sc = _scenario("forced_peel", tmp_path)
    out = coupled_solve(sc.problem_data(), sc.toughness_model(), DELTA, sc.horizon)
    tr = out.trace
    r = tr.max_residual()
    reached = out.field.t_end >= sc.horizon - 1e-12
    ok = reached and r <= 2e-3 * tr.scale
    assert verdict(13, ok, f"t_end {out.field.t_end:g}, max residual {r:.3e} (<= {2e-3 * tr.scale:.2e})")

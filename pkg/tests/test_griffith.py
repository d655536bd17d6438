import numpy as np
import pytest

from peeldyn.dalembert import transform_data
from peeldyn.duhamel import solve_prescribed
from peeldyn.errors import DomainError, NonExistenceError, ValidationError
from peeldyn.geometry import CharMaps, Front
from peeldyn.griffith import (NON_LIPSCHITZ_DIAGNOSIS, CoupledState, Toughness, _y_grid,
                              coupled_solve, coupled_window_size, front_ode_rhs, gap_from_lambda,
                              griffith_residuals, lambda_capital, lambda_route_speed,
                              right_lipschitz_probe, toughness_eval, verify_solution_pair)

from conftest import const, make_data

HALF = Toughness("constant", 1.0, {"value": 0.5})


def test_toughness_examples():
    assert HALF(1.3) == 0.5
    sq = Toughness("sqrt_example", 1.0)
    assert sq(1.0) == pytest.approx(0.5)
    assert sq(1.0 + 1 / 9) == pytest.approx(0.25)
    assert sq(2.0) == pytest.approx(0.25)
    pw = Toughness("pointwise_override", 1.0, {"value": 0.5, "override": 1 / 6})
    assert pw(1.0) == pytest.approx(1 / 6)
    assert pw(1.0 + 1e-9) == 0.5
    with pytest.raises(DomainError):
        HALF(0.5)


def test_piecewise_constant_is_right_continuous():
    k = Toughness("piecewise_constant", 1.0, {"points": [1.2], "values": [0.5, 0.8]})
    assert k(1.2) == 0.8
    assert k(1.2 - 1e-12) == 0.5


def test_time_dependent_toughness():
    k = Toughness("time_dependent_sampled", 1.0,
                  {"t_points": [0, 10], "x_points": [1, 100], "values": np.array([[0.5, 0.5], [3, 3]])})
    assert toughness_eval(k, 1.5, 0.4) == pytest.approx(0.5 * (1 + 0.5 * 0.4))


def test_toughness_validation():
    with pytest.raises(ValidationError):
        Toughness("constant", 1.0, {"value": -1.0})
    with pytest.raises(ValidationError):
        Toughness("lipschitz_sampled", 1.0, {"x_points": [1, 2], "values": [0.5, 2.0], "lipschitz": 1.0})
    with pytest.raises(ValidationError):
        Toughness("bogus", 1.0)


def test_front_ode_rhs_examples():
    assert front_ode_rhs(0.5, 0.5) == 0.0
    assert front_ode_rhs(0.2, 0.5) == 0.0
    assert front_ode_rhs(1.5, 0.5) == pytest.approx(0.5)


def test_right_lipschitz_probe():
    assert not right_lipschitz_probe(HALF, 1.0)[0]
    assert right_lipschitz_probe(Toughness("sqrt_example", 1.0), 1.0)[0]
    k = Toughness("lipschitz_sampled", 1.0, {"x_points": [1, 2], "values": [0.5, 0.6]})
    assert not right_lipschitz_probe(k, 1.0)[0]


def _state(u1):
    d = make_data(u1=const(u1, 0.0, 1.0))
    vd = transform_data(d)
    y = _y_grid(1.0, 0.3, 1e-3)
    return CoupledState(vdata=vd, ell_start=1.0, y=y, gap=np.zeros_like(y), horizon_rel=0.3, delta=1e-3)


@pytest.mark.parametrize("u1, expected", [(0.0, 0.0), (1.0, 1.0), (2.0, 4.0)])
def test_lambda_capital_examples(u1, expected):
    Lam = lambda_capital(_state(u1), HALF)
    np.testing.assert_allclose(Lam, expected, atol=1e-14)


def test_gap_update_examples():
    for u1, slope in ((0.0, 0.0), (1.0, 0.0), (2.0, 1.5)):
        st = _state(u1)
        g = gap_from_lambda(st.y, lambda_capital(st, HALF), 1e6)
        lam = st.y + 1.0 + g
        # lam' = 1 + slope, and ell' = slope / (1 + slope) = (Lambda - 1) / (Lambda + 1)
        np.testing.assert_allclose(np.diff(lam) / np.diff(st.y), 1.0 + slope, atol=1e-12)


def test_residuals_stationary_subcritical():
    d = make_data(u1=const(0.5, 0.0, 1.0))
    f = Front.constant(1.0, 1.0)
    wf, _ = solve_prescribed(d, f, 2e-3, 0.3)
    rep = griffith_residuals(wf, f, HALF, np.linspace(0, 0.3, 16))
    assert rep.max_violation == 0.0 and rep.max_complementarity == 0.0


def test_residuals_flag_corrupted_front():
    d = make_data()
    f = Front.affine(1.0, 0.9, 1.0)
    wf, _ = solve_prescribed(d, f, 2e-3, 0.3)
    rep = griffith_residuals(wf, f, HALF, np.linspace(0, 0.3, 16))
    print("complementarity", rep.max_complementarity)
    assert rep.max_complementarity == pytest.approx(0.45)


def test_zero_data_coupled():
    res = coupled_solve(make_data(), HALF, 2e-3, 0.3)
    assert np.all(res.front.ell == 1.0)
    assert all(w["iterations"] == 1 for w in res.report.window_log)


def test_constant_speed_front():
    res = coupled_solve(make_data(u1=const(2.0, 0.0, 1.0)), HALF, 1e-3, 0.5)
    t = np.linspace(0, 0.5, 51)
    err = np.max(np.abs(res.front.position(t) - (1.0 + 0.6 * t)))
    print("front error", err)
    assert err < 1e-3
    lam_speed = lambda_route_speed(res, HALF, res.report.times)
    np.testing.assert_allclose(lam_speed, front_ode_rhs(res.report.G0, res.report.kappa), rtol=1e-8)


def test_lambda_ell_round_trip():
    res = coupled_solve(make_data(u1=const(2.0, 0.0, 1.0)), HALF, 1e-3, 0.3)
    maps = CharMaps(res.front, delta=1e-6)
    t = np.linspace(0, 0.3, 31)
    np.testing.assert_allclose(maps.lam(maps.phi(t)), t, atol=1e-3)


def test_threshold_is_stationary():
    res = coupled_solve(make_data(u1=const(1.0, 0.0, 1.0)), HALF, 1e-3, 0.3)
    assert np.all(res.front.ell == 1.0)
    assert np.all(res.front.slopes == 0.0)


def test_pointwise_toughness_has_no_solution():
    k = Toughness("pointwise_override", 1.0, {"value": 0.5, "override": 1 / 6})
    with pytest.raises(NonExistenceError) as info:
        coupled_solve(make_data(u1=const(1.0, 0.0, 1.0)), k, 1e-3, 0.5)
    assert "oscillat" in info.value.diagnosis
    assert info.value.exit_code == 3


def test_sqrt_toughness_reports_non_uniqueness():
    k = Toughness("sqrt_example", 1.0)
    res = coupled_solve(make_data(u1=const(1.0, 0.0, 1.0)), k, 1e-3, 0.3)
    assert NON_LIPSCHITZ_DIAGNOSIS in res.report.diagnoses
    t = np.linspace(0, 0.3, 31)
    err = np.max(np.abs(res.front.position(t) - (1 + t * t / 4)))
    print("distance to the t^2/4 branch", err)
    assert err < 5e-3


def test_verify_pair_accepts_both_branches_and_rejects_sonic():
    k = Toughness("sqrt_example", 1.0)
    d = make_data(u1=const(1.0, 0.0, 1.0))
    for f, ok in ((Front.constant(1.0, 0.6), True),
                  (Front.from_function(lambda t: 1 + t * t / 4, 0.6, 600), True),
                  (Front.affine(1.0, 1.0, 0.6), False)):
        wf, _ = solve_prescribed(d, f, 1e-3, 0.5)
        rep = verify_solution_pair(wf, f, d, k, 1e-3)
        print(rep.residuals)
        assert rep.accepted is ok


def test_coupled_window_size_is_lattice_multiple():
    vd = transform_data(make_data(u1=const(2.0, 0.0, 1.0)))
    T = coupled_window_size(1.0, 0.0, vd, M=1.0, delta=1e-3)
    assert 0 < T <= 0.225 + 1e-12
    assert abs(T / 1e-3 - round(T / 1e-3)) < 1e-9


def test_iteration_cap_raises_convergence_error():
    from peeldyn.dalembert import constant_forcing
    from peeldyn.errors import ConvergenceError
    d = make_data(nu=0.5, u1=const(1.5, 0.0, 1.0), forcing=constant_forcing(1.0))
    with pytest.raises(ConvergenceError) as info:
        coupled_solve(d, HALF, 2e-3, 0.1, max_iter=2)
    assert info.value.exit_code == 2

import math

import numpy as np
import pytest

from peeldyn.dalembert import build_parts, eval_A, transform_data
from peeldyn.duhamel import (Lattice, WindowSolution, apply_L, duhamel_integral, picard_solve_window,
                             solve_prescribed, solve_u_route, window_length)
from peeldyn.errors import ValidationError
from peeldyn.geometry import CharMaps, Front

from conftest import const, make_data, sine


def _window(data, length=0.2, delta=2e-3, front=None):
    front = front or Front.constant(data.ell0, 1.0)
    maps = CharMaps(front)
    lat = Lattice.build(delta, 0.0, length, front)
    return transform_data(data), maps, lat


def test_window_length_respects_bound():
    L = window_length(1.0, 2.0, 1e-3)
    assert L <= 0.9 * 0.5 * min(0.5, 4 / 4.0) + 1e-12
    assert abs(L / 1e-3 - round(L / 1e-3)) < 1e-9


def test_duhamel_integral_of_constants_is_area():
    maps = CharMaps(Front.constant(1.0, 1.0))
    assert duhamel_integral(0.0, maps, 0.3, 0.5) == 0.0
    assert duhamel_integral(1.0, maps, 0.3, 0.5) == pytest.approx(0.09, abs=1e-12)
    assert duhamel_integral(1.0, maps, 0.6, 0.2) == pytest.approx(0.20, abs=1e-12)


def test_zero_damping_apply_is_A():
    vd, maps, lat = _window(make_data(u0=sine()))
    sol = WindowSolution(vd, maps, lat, coupling=0.0)
    rng = np.random.default_rng(0)
    W = apply_L(sol, rng.standard_normal((lat.ni, lat.nj)))
    np.testing.assert_allclose(W.ravel()[sol.fi], sol.A_nodes, atol=1e-14)


def test_picard_zero_damping_single_iteration():
    vd, maps, lat = _window(make_data(u0=sine()))
    sol, rep = picard_solve_window(vd, maps, lat)
    assert rep.iterations == 1
    parts = build_parts(vd, maps)
    t = 0.5 * (sol.node_xi + sol.node_eta)
    x = 0.5 * (sol.node_eta - sol.node_xi)
    np.testing.assert_allclose(sol.V.ravel()[sol.fi], eval_A(parts, maps, t, x), atol=1e-12)


def test_picard_damped_zero_data():
    vd, maps, lat = _window(make_data(nu=2.0))
    sol, rep = picard_solve_window(vd, maps, lat)
    assert rep.iterations == 1
    assert np.max(np.abs(sol.V)) == 0.0


def test_standing_wave_closed_form():
    d = make_data(u0=sine())
    wf, rep = solve_prescribed(d, Front.constant(1.0, 3.0), 2e-3, 0.5)
    t = np.linspace(0, 0.5, 11)[:, None] * np.ones((1, 21))
    x = np.linspace(0, 1, 21)[None, :] * np.ones((11, 1))
    err = np.max(np.abs(wf.u(t, x) - np.sin(math.pi * x) * np.cos(math.pi * t)))
    print("standing wave sup error", err, "windows", len(rep.windows))
    assert err < 1e-5


def test_damped_closed_form():
    # u = e^{-t} (cos(wt) + sin(wt)/w) sin(pi x), w = sqrt(pi^2 - 1), for nu = 2
    d = make_data(nu=2.0, u0=sine())
    wf, rep = solve_prescribed(d, Front.constant(1.0, 3.0), 2e-3, 0.5)
    w = math.sqrt(math.pi ** 2 - 1)
    t = np.linspace(0, 0.5, 11)[:, None] * np.ones((1, 21))
    x = np.linspace(0, 1, 21)[None, :] * np.ones((11, 1))
    exact = np.exp(-t) * (np.cos(w * t) + np.sin(w * t) / w) * np.sin(math.pi * x)
    err = np.max(np.abs(wf.u(t, x) - exact))
    print("damped sup error", err, "iterations", rep.iterations)
    assert err < 1e-5
    assert all(c < 0.30 for c in rep.contraction_estimates if not math.isnan(c))


def test_u_route_agrees_with_transform():
    d = make_data(nu=2.0, u0=sine())
    f = Front.constant(1.0, 3.0)
    a, _ = solve_prescribed(d, f, 2e-3, 0.3)
    b, _ = solve_u_route(d, f, 2e-3, 0.3)
    t = np.full(21, 0.3)
    x = np.linspace(0, 1, 21)
    assert np.max(np.abs(a.u(t, x) - b.u(t, x))) < 1e-4


def test_moving_front_boundary_traces():
    d = make_data(u0=sine())
    f = Front.affine(1.0, 0.3, 1.0)
    wf, _ = solve_prescribed(d, f, 2e-3, 0.5)
    t = np.linspace(0, 0.5, 26)
    assert np.max(np.abs(wf.u(t, np.zeros_like(t)))) < 1e-12
    assert np.max(np.abs(wf.u(t, f.position(t)))) < 1e-12


def test_window_chaining_is_consistent():
    # a forced single long window versus chained short ones
    d = make_data(nu=1.0, u0=sine())
    f = Front.constant(1.0, 3.0)
    a, ra = solve_prescribed(d, f, 2e-3, 0.4)
    b, rb = solve_prescribed(d, f, 2e-3, 0.4, window=0.1)
    assert len(rb.windows) == 4
    x = np.linspace(0, 1, 21)
    diff = np.max(np.abs(a.u(np.full(21, 0.4), x) - b.u(np.full(21, 0.4), x)))
    print("chained vs default windows", diff)
    assert diff < 1e-4


def test_incompatible_data_is_rejected():
    d = make_data(u0=const(1.0, 0.0, 1.0))
    with pytest.raises(ValidationError):
        solve_prescribed(d, Front.constant(1.0, 2.0), 2e-3, 0.2)

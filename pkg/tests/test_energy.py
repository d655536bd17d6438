import math

import numpy as np
import pytest

from peeldyn.duhamel import solve_prescribed
from peeldyn.energy import (debond_dissipation, dissipated_energy, energy_rate, energy_trace,
                            external_work, horizontal_displacement, internal_energy,
                            release_rate_G0, release_rate_Galpha, sample_times)
from peeldyn.errors import DomainError
from peeldyn.geometry import Front

from conftest import const, make_data, sine

FIXED = Front.constant(1.0, 3.0)


def test_zero_field_has_zero_energies():
    wf, _ = solve_prescribed(make_data(), FIXED, 2e-3, 0.2)
    assert internal_energy(wf, 0.2) == 0.0
    assert dissipated_energy(wf, 0.2) == 0.0
    assert float(release_rate_G0(wf, 0.1)) == 0.0
    assert horizontal_displacement(wf, 0.1, 0.0) == 0.0


def test_initial_energy_of_unit_velocity():
    wf, _ = solve_prescribed(make_data(u1=const(1.0, 0.0, 1.0)), FIXED, 2e-3, 0.2)
    assert internal_energy(wf, 0.0) == pytest.approx(0.5, abs=1e-12)


def test_release_rate_for_uniform_velocity():
    c = 1.5
    wf, _ = solve_prescribed(make_data(u1=const(c, 0.0, 1.0)), FIXED, 2e-3, 0.4)
    t = np.array([0.0, 0.1, 0.3, 0.4])
    np.testing.assert_allclose(release_rate_G0(wf, t), c * c / 2, rtol=1e-12)


def test_Galpha_examples():
    assert release_rate_Galpha(2.0, 0.0) == 2.0
    assert release_rate_Galpha(2.0, 1 / 3) == pytest.approx(1.0)
    assert release_rate_Galpha(2.0, 1 - 1e-12) < 1e-11
    with pytest.raises(DomainError):
        release_rate_Galpha(1.0, 1.0)


def test_dissipation_matches_energy_loss():
    d = make_data(nu=1.0, u0=sine())
    wf, _ = solve_prescribed(d, FIXED, 2e-3, 0.5)
    times = sample_times(0.5, 2e-3)
    A = dissipated_energy(wf, 0.5, times)
    loss = internal_energy(wf, 0.0) - internal_energy(wf, 0.5)
    print("dissipated", A, "energy loss", loss)
    assert A == pytest.approx(loss, abs=1e-3)


def test_constant_boundary_load_does_no_work():
    u0 = make_data().u0.from_callable(lambda x: 0.3 * (1 - x), 0.0, 1.0, 10, dfunc=lambda x: -0.3 + 0 * x)
    d = make_data(u0=u0, w=const(0.3, 0.0, 5.0))
    wf, _ = solve_prescribed(d, FIXED, 2e-3, 0.2)
    assert external_work(wf, d, 0.2) == 0.0


def test_conservation_on_fixed_front():
    d = make_data(u0=sine())
    wf, _ = solve_prescribed(d, FIXED, 2e-3, 0.5)
    tr = energy_trace(wf, d)
    print("max balance residual", tr.max_residual())
    assert tr.max_residual() < 1e-9
    assert tr.E[0] == pytest.approx(math.pi ** 2 / 4, rel=1e-9)


def test_balance_with_boundary_load():
    w = make_data().w.from_callable(lambda t: 0.2 * np.sin(3 * t) * t, 0.0, 5.0, 5000,
                                    dfunc=lambda t: 0.2 * (3 * t * np.cos(3 * t) + np.sin(3 * t)))
    d = make_data(nu=0.5, w=w)
    wf, _ = solve_prescribed(d, FIXED, 1e-3, 0.4)
    tr = energy_trace(wf, d)
    print("work", tr.W[-1], "residual", tr.max_residual())
    assert abs(tr.W[-1]) > 1e-4
    assert tr.max_residual() < 1e-3 * tr.scale


def test_debond_dissipation_constant_toughness():
    f = Front.affine(1.0, 0.5, 1.0)
    times = np.array([0.0, 0.2, 0.5])
    D = debond_dissipation(f, times, lambda t, x: np.full(np.shape(x), 0.5), 1e-3)
    np.testing.assert_allclose(D, 0.5 * 0.5 * times, atol=1e-14)


def test_horizontal_displacement_of_linear_profile():
    # u = c (1 - x) at rest: u_x^2 = c^2, so h(0, 0) = c^2 ell / 2
    c = 0.4
    d = make_data(u0=make_data().u0.from_callable(lambda x: c * (1 - x), 0.0, 1.0, 10,
                                                  dfunc=lambda x: -c + 0 * x),
                  w=const(c, 0.0, 5.0))
    wf, _ = solve_prescribed(d, FIXED, 2e-3, 0.1)
    assert horizontal_displacement(wf, 0.0, 0.0) == pytest.approx(c * c / 2, rel=1e-9)
    assert horizontal_displacement(wf, 0.0, 1.0) == 0.0


def test_energy_rate_on_moving_front():
    d = make_data(u1=const(1.0, 0.0, 1.0))
    f = Front.affine(1.0, 0.2, 1.0)
    wf, _ = solve_prescribed(d, f, 1e-3, 0.3)
    # dT/dt = -ell' G_ell' with G0 = 1/2
    assert energy_rate(wf, d, 0.1) == pytest.approx(-0.2 * (0.8 / 1.2) * 0.5, rel=1e-9)

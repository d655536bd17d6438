import math

import numpy as np
import pytest

from peeldyn.duhamel import solve_prescribed
from peeldyn.errors import StructuralError, ValidationError
from peeldyn.geometry import Front
from peeldyn.oracle import FdmGrid, compare_fields, fdm_solve_prescribed

from conftest import make_data, sine


def test_grid_validation():
    with pytest.raises(ValidationError):
        FdmGrid(h=0.0)
    with pytest.raises(ValidationError):
        FdmGrid(h=1e-2, cfl=0.95)
    k = FdmGrid(h=1e-2).time_step(1.0, 0.3, 0.4)
    assert k <= 0.9 * 1e-2 / 1.3 + 1e-15


def test_zero_data_zero_field():
    res = fdm_solve_prescribed(make_data(), Front.constant(1.0, 1.0), FdmGrid(1e-2), 0.3)
    assert np.max(np.abs(res.U)) == 0.0


def test_standing_wave_second_order():
    errs = []
    for h in (1e-2, 5e-3):
        res = fdm_solve_prescribed(make_data(u0=sine()), Front.constant(1.0, 1.0), FdmGrid(h), 0.5)
        x, u = res.slice(0.5)
        errs.append(np.max(np.abs(u - np.sin(math.pi * x) * math.cos(0.5 * math.pi))))
    print("fdm errors", errs)
    assert errs[0] / errs[1] > 3.5


def test_energy_nonincreasing_with_damping():
    res = fdm_solve_prescribed(make_data(nu=1.0, u0=sine()), Front.constant(1.0, 1.0), FdmGrid(5e-3), 0.5)
    steps = np.diff(res.energy)
    assert np.all(steps <= 1e-10 * res.energy[0])


def test_rejects_sonic_front():
    with pytest.raises(StructuralError):
        fdm_solve_prescribed(make_data(), Front.affine(1.0, 1.0, 1.0), FdmGrid(1e-2), 0.3)


def test_compare_identical_is_zero():
    d = make_data(u0=sine())
    f = Front.constant(1.0, 1.0)
    wf, _ = solve_prescribed(d, f, 2e-3, 0.2)
    res = fdm_solve_prescribed(d, f, FdmGrid(2e-3), 0.2)
    diff = compare_fields(wf, res, [0.2])[0]
    assert diff.l2 < 1e-4
    zero = fdm_solve_prescribed(make_data(), f, FdmGrid(2e-3), 0.2)
    wz, _ = solve_prescribed(make_data(), f, 2e-3, 0.2)
    assert compare_fields(wz, zero, [0.2])[0].l2 == 0.0


@pytest.mark.parametrize("nu", [0.0, 2.0])
def test_joint_refinement_on_fixed_front(nu):
    d = make_data(nu=nu, u0=sine())
    f = Front.constant(1.0, 1.0)
    l2 = []
    for h in (2e-3, 1e-3):
        wf, _ = solve_prescribed(d, f, h, 0.4)
        res = fdm_solve_prescribed(d, f, FdmGrid(h), 0.4)
        l2.append(compare_fields(wf, res, [0.4])[0].l2)
    print("nu", nu, "l2", l2)
    assert l2[1] < l2[0]

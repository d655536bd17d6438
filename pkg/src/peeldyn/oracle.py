"""Finite-difference reference solver for a prescribed front.

The moving interval ``0 < x < ell(t)`` is mapped to ``0 < y < 1`` with
``y = x / ell(t)``.  For ``U(t, y) = u(t, y ell(t))`` and ``c = y ell' / ell``
the damped wave equation becomes (on each linear piece of the front)

    U_tt - 2 c U_ty + (c^2 - 1/ell^2) U_yy + (2 y ell'^2 / ell^2) U_y
        + nu (U_t - c U_y) = f.

Second differences in time and space are centred; the mixed derivative
and the damping are centred across levels ``n - 1`` and ``n + 1``, so each
step solves one tridiagonal system.  This solver shares no code with the
characteristic solver and serves as an independent check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .dalembert import ProblemData
from .duhamel import WaveField
from .errors import StructuralError, ValidationError
from .geometry import Front

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FdmGrid:
    """Spatial step ``h`` (physical units at ``t = 0``) and the CFL margin."""

    h: float
    cfl: float = 0.9

    def __post_init__(self):
        if self.h <= 0:
            raise ValidationError("grid step must be positive")
        if not 0 < self.cfl <= 0.9:
            raise ValidationError("CFL number must lie in (0, 0.9]")

    def cells(self, ell0: float) -> int:
        return max(2, int(math.ceil(ell0 / self.h - 1e-9)))

    def time_step(self, ell0: float, max_speed: float, t_final: float) -> float:
        """Largest ``k <= cfl * h / (1 + max_speed)`` dividing ``t_final`` exactly."""
        k_max = self.cfl * (ell0 / self.cells(ell0)) / (1.0 + max_speed)
        n = max(1, int(math.ceil(t_final / k_max - 1e-12)))
        return t_final / n


@dataclass
class FdmResult:
    front: Front
    y: np.ndarray
    times: np.ndarray
    U: np.ndarray
    energy: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    energy_times: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def slice(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Physical nodes and values at a stored time."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, t):
            raise ValidationError(f"time {t} was not stored")
        ell = float(self.front.position(t))
        return self.y * ell, self.U[k]

    def u_at(self, t: float, x) -> np.ndarray:
        xs, us = self.slice(t)
        return np.interp(np.asarray(x, float), xs, us, right=0.0)


def fdm_solve_prescribed(data: ProblemData, front: Front, grid: FdmGrid, t_final: float,
                         out_times: Optional[Sequence[float]] = None,
                         speed_cap: float = 1.0 - 1e-6) -> FdmResult:
    """March the front-fitted scheme to ``t_final`` and store ``out_times``."""
    if abs(front.ell0 - data.ell0) > 1e-12 * data.ell0:
        raise ValidationError("front and data disagree on the initial length")
    slopes = front.slopes
    if np.any(slopes > speed_cap):
        raise StructuralError("front-fitted oracle needs front slope strictly below 1")
    f_front = front.extended(t_final)
    out_times = sorted(set([0.0, float(t_final)] + [float(t) for t in (out_times or [])]))
    nu = data.nu
    N = grid.cells(data.ell0)
    hy = 1.0 / N
    y = np.linspace(0.0, 1.0, N + 1)
    smax = float(np.max(f_front.slopes)) if f_front.slopes.size else 0.0
    k = grid.time_step(data.ell0, smax, t_final)
    n_steps = int(round(t_final / k))
    out_steps = {int(round(t / k)): t for t in out_times}
    for s, t in out_steps.items():
        if abs(s * k - t) > 1e-9 * max(1.0, t_final):
            logger.warning("output time %g is not a multiple of the step %g", t, k)

    def coeffs(t):
        ell = float(f_front.position(t))
        sp = float(f_front.slope(t))
        c = y * sp / ell
        return ell, sp, c

    def forcing(t, ell):
        if data.forcing is None:
            return np.zeros(N + 1)
        return data.forcing(np.full(N + 1, t), y * ell)

    def Dy(U):
        d = np.zeros_like(U)
        d[1:-1] = (U[2:] - U[:-2]) / (2 * hy)
        return d

    def Dyy(U):
        d = np.zeros_like(U)
        d[1:-1] = (U[2:] - 2 * U[1:-1] + U[:-2]) / hy ** 2
        return d

    # initial level and Taylor first step
    ell, sp, c = coeffs(0.0)
    x0 = y * ell
    U0 = data.u0(x0)
    Ut0 = data.u1(x0) + y * sp * data.u0.derivative(x0)
    Utt0 = (forcing(0.0, ell) + 2 * c * Dy(Ut0) - (c ** 2 - 1 / ell ** 2) * Dyy(U0)
            - (2 * y * sp ** 2 / ell ** 2) * Dy(U0) - nu * (Ut0 - c * Dy(U0)))
    U1 = U0 + k * Ut0 + 0.5 * k * k * Utt0
    U1[0] = float(data.w(k))
    U1[-1] = 0.0

    stored_t, stored_U = [], []
    energies, e_times = [], []

    def store(step, U):
        if step in out_steps:
            stored_t.append(step * k)
            stored_U.append(U.copy())

    def discrete_energy(Uold, Unew, ell_mid):
        vel = (Unew - Uold) / k
        grad = np.diff(Unew) * np.diff(Uold) / (hy * ell_mid) ** 2
        return 0.5 * ell_mid * hy * (np.sum(vel[1:-1] ** 2) + np.sum(grad))

    store(0, U0)
    store(1, U1)
    energies.append(discrete_energy(U0, U1, float(f_front.position(0.5 * k))))
    e_times.append(0.5 * k)
    Uprev, Ucur = U0, U1
    ab = np.zeros((3, N + 1))
    for n in range(1, n_steps):
        t = n * k
        ell, sp, c = coeffs(t)
        b = 2 * y * sp ** 2 / ell ** 2
        diag = 1 / k ** 2 + nu / (2 * k)
        off = c / (2 * k * hy)
        rhs = (forcing(t, ell) + (2 * Ucur - Uprev) / k ** 2 + nu * Uprev / (2 * k)
               - (c / k) * Dy(Uprev) - (c ** 2 - 1 / ell ** 2) * Dyy(Ucur) - b * Dy(Ucur)
               + nu * c * Dy(Ucur))
        ab[:] = 0.0
        ab[1, :] = diag
        ab[0, 2:] = -off[1:-1]       # coefficient of U_{j+1} in row j
        ab[2, :-2] = off[1:-1]       # coefficient of U_{j-1} in row j
        ab[1, 0] = ab[1, -1] = 1.0
        rhs[0] = float(data.w(t + k))
        rhs[-1] = 0.0
        Unext = solve_banded((1, 1), ab, rhs)
        energies.append(discrete_energy(Ucur, Unext, float(f_front.position(t + 0.5 * k))))
        e_times.append(t + 0.5 * k)
        Uprev, Ucur = Ucur, Unext
        store(n + 1, Ucur)
    return FdmResult(front=f_front, y=y, times=np.array(stored_t), U=np.array(stored_U),
                     energy=np.array(energies), energy_times=np.array(e_times))


@dataclass
class FieldDifference:
    t: float
    l2: float
    sup: float


def compare_fields(semi: WaveField, fdm: FdmResult, times: Sequence[float]) -> list[FieldDifference]:
    """L2-in-space and sup differences of ``u`` at the given times on the FDM nodes."""
    out = []
    for t in times:
        x, uf = fdm.slice(t)
        us = semi.u(np.full(x.shape, t), x)
        diff = us - uf
        out.append(FieldDifference(t=float(t), l2=float(math.sqrt(np.trapezoid(diff ** 2, x))),
                                   sup=float(np.max(np.abs(diff)))))
    return out

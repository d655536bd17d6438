"""Energies, external work, energy release rate and the balance residual.

All slice integrals use the trapezoidal rule on the lattice nodes of a
level plus the front knot; time integrals use the trapezoidal rule over
the sample times of an :class:`EnergyTrace`.  Sample times coincide with
lattice levels, so no interpolation in time is needed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dalembert import ProblemData
from .duhamel import WaveField
from .errors import DomainError
from .geometry import Front

logger = logging.getLogger(__name__)

Kappa = Callable[[np.ndarray, np.ndarray], np.ndarray]   # kappa(t, x)


def _trapz(y, x) -> float:
    return float(np.trapezoid(y, x)) if len(x) > 1 else 0.0


def slice_quantities(field: WaveField, t: float, forcing: Optional[Callable] = None,
                     left: bool = True) -> dict:
    """Spatial integrals on the level ``t`` needed by the energy trace."""
    x, _ = field.node_slice(t, left=left)
    tt = np.full(x.shape, t)
    ut, ux = field.u_derivatives(tt, x, left=left)
    out = {
        "E": 0.5 * _trapz(ut ** 2 + ux ** 2, x),
        "Q": _trapz(ut ** 2, x),
        "ux0": float(ux[0]) if x[0] == 0 else float("nan"),
        "F": 0.0,
    }
    if forcing is not None:
        out["F"] = _trapz(forcing(tt, x) * ut, x)
    return out


def internal_energy(field: WaveField, t: float) -> float:
    """``(1/2) * integral over [0, ell(t)] of u_t^2 + u_x^2``."""
    return slice_quantities(field, t)["E"]


def sample_times(t_end: float, delta: float, max_samples: int = 400) -> np.ndarray:
    """Lattice-aligned sample times from 0 to ``t_end`` (at most ``max_samples`` intervals)."""
    n_steps = int(round(t_end / delta))
    stride = max(1, int(round(n_steps / max_samples)))
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx * delta


def dissipated_energy(field: WaveField, t: float, times: Optional[np.ndarray] = None) -> float:
    """``nu * integral_0^t integral u_t^2``; zero for ``nu = 0``."""
    if field.nu == 0:
        return 0.0
    times = _upto(times if times is not None else sample_times(field.t_end, field.delta), t)
    q = [slice_quantities(field, s)["Q"] for s in times]
    return field.nu * _trapz(q, times)


def external_work(field: WaveField, data: ProblemData, t: float,
                  times: Optional[np.ndarray] = None) -> float:
    """Work of the boundary load, ``-integral_0^t w'(s) u_x(s, 0) ds``.

    This is the power ``w'(s) [w'(s) + nu w(s)/2 - e^{-nu s/2}(...)]`` of the
    closed-form expression, with the bracket read off the solved field.
    """
    times = _upto(times if times is not None else sample_times(field.t_end, field.delta), t)
    wd = data.w.derivative(times)
    if not np.any(wd):
        return 0.0
    ux0 = np.array([slice_quantities(field, s)["ux0"] for s in times])
    return _trapz(-wd * ux0, times)


def _upto(times: np.ndarray, t: float) -> np.ndarray:
    times = np.asarray(times, float)
    sel = times[times <= t + 1e-12]
    if sel.size == 0 or sel[-1] < t - 1e-12:
        raise DomainError(f"time {t} is not a sample time")
    return sel


def release_rate_G0(field: WaveField, t, left: bool = True) -> np.ndarray:
    """Energy release rate at zero speed, ``G0 = e^{-nu t} B^2 / 2``."""
    t = np.asarray(t, float)
    B = field.release_B(t, left=left)
    return 0.5 * np.exp(-field.nu * t) * B ** 2


def release_rate_Galpha(G0, alpha):
    """``G_alpha = (1 - alpha) / (1 + alpha) * G0`` for speeds ``0 <= alpha < 1``."""
    a = np.asarray(alpha, float)
    if np.any(a >= 1) or np.any(a < 0):
        raise DomainError("speed alpha must lie in [0, 1)")
    out = (1.0 - a) / (1.0 + a) * np.asarray(G0, float)
    return out if out.ndim else float(out)


def debond_dissipation(front: Front, times: np.ndarray, kappa: Optional[Kappa],
                       delta: float) -> np.ndarray:
    """``integral of kappa(s, ell(s)) ell'(s) ds`` from 0 to each time.

    For time-independent toughness this is ``integral_{ell0}^{ell(t)} kappa``.
    The front is piecewise linear, so the integral is taken segment by
    segment with a midpoint rule in time on a grid finer than the lattice.
    """
    times = np.asarray(times, float)
    if kappa is None:
        return np.zeros(times.shape)
    t_end = float(times[-1])
    f = front.extended(t_end)
    n = max(8, int(math.ceil(4 * t_end / delta)))
    grid = np.union1d(np.linspace(0.0, t_end, n + 1), f.t[f.t < t_end])
    grid = np.union1d(grid, times)
    ell = f.position(grid)
    dl = np.diff(ell)
    mid = 0.5 * (grid[1:] + grid[:-1])
    lm = 0.5 * (ell[1:] + ell[:-1])
    inc = np.where(dl > 0, kappa(mid, lm) * dl, 0.0)
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    return np.interp(times, grid, cum)


def horizontal_displacement(field: WaveField, t: float, x: float) -> float:
    """``h(t, x) = (1/2) * integral_x^{ell(t)} u_x^2``; zero at or beyond the front."""
    ell = float(field.front.extended(t).position(t))
    if x >= ell:
        return 0.0
    xs, _ = field.node_slice(t, left=True)
    keep = xs > x
    grid = np.concatenate([[x], xs[keep]])
    _, ux = field.u_derivatives(np.full(grid.shape, t), grid, left=True)
    return 0.5 * _trapz(ux ** 2, grid)


@dataclass
class EnergyTrace:
    """Time series of the energy budget.

    ``balance_residual = T + D - T(0) - W`` with ``T = E + A - F``, where
    ``D`` is the debonding dissipation and ``F`` the work of the body force.
    """

    times: np.ndarray
    E: np.ndarray
    A_diss: np.ndarray
    F_work: np.ndarray
    W: np.ndarray
    G0: np.ndarray
    debond_diss: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def T_total(self) -> np.ndarray:
        return self.E + self.A_diss - self.F_work

    @property
    def balance_residual(self) -> np.ndarray:
        T = self.T_total
        return T + self.debond_diss - T[0] - self.W

    @property
    def scale(self) -> float:
        return max(float(self.T_total[0]), 1.0)

    def max_residual(self) -> float:
        return float(np.max(np.abs(self.balance_residual)))

    def columns(self) -> dict[str, np.ndarray]:
        return {"t": self.times, "E": self.E, "A": self.A_diss, "T": self.T_total, "W": self.W,
                "balance_residual": self.balance_residual}


def balance_residual(trace: EnergyTrace) -> np.ndarray:
    """Residual of the energy-dissipation balance at every sample time."""
    return trace.balance_residual


def energy_trace(field: WaveField, data: ProblemData, kappa: Optional[Kappa] = None,
                 times: Optional[np.ndarray] = None) -> EnergyTrace:
    """Evaluate every energy term on lattice-aligned sample times."""
    if times is None:
        times = sample_times(field.t_end, field.delta)
    times = np.asarray(times, float)
    rows = [slice_quantities(field, float(s), data.forcing) for s in times]
    E = np.array([r["E"] for r in rows])
    Q = np.array([r["Q"] for r in rows])
    Fq = np.array([r["F"] for r in rows])
    ux0 = np.array([r["ux0"] for r in rows])
    wd = data.w.derivative(times)
    W = cumulative_trapezoid(np.where(wd != 0, -wd * ux0, 0.0), times, initial=0.0)
    A = field.nu * cumulative_trapezoid(Q, times, initial=0.0)
    Fw = cumulative_trapezoid(Fq, times, initial=0.0)
    G0 = release_rate_G0(field, times)
    D = debond_dissipation(field.front, times, kappa, field.delta)
    return EnergyTrace(times=times, E=E, A_diss=A, F_work=Fw, W=W, G0=G0, debond_diss=D)


def energy_rate(field: WaveField, data: ProblemData, t: float) -> float:
    """Rate of the total energy ``T = E + A - F`` on a prescribed front.

    ``dT/dt = -ell' G_{ell'} - w' u_x(t, 0)``, with the release rate taken
    from the front quantity ``B``.
    """
    f = field.front.extended(t + field.delta)
    speed = float(f.slope(t))
    G0 = float(release_rate_G0(field, t))
    Ga = release_rate_Galpha(G0, min(speed, 1 - 1e-15))
    q = slice_quantities(field, t, data.forcing)
    wd = float(data.w.derivative(t))
    return -speed * Ga - (wd * q["ux0"] if wd else 0.0)

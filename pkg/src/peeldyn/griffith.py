"""Toughness models, Griffith's criterion and the coupled front/field solver.

The front is parametrised through ``lam``, the time at which it sits on the
characteristic ``t - x = y``.  With ``lam(y) = y + ell_k + gap(y)`` Griffith's
criterion becomes

    gap'(y) = (max(Lambda(y), 1) - 1) / 2,
    Lambda(y) = B(y)^2 / (2 exp(nu t) kappa(t, x)),   t = lam(y), x = lam(y) - y,

where ``B`` is the front quantity of the field (``G0 = exp(-nu t) B^2 / 2``),
so ``Lambda = G0 / kappa``.  One window iterates field and gap together
until both stop changing, then the next window restarts from the top slice.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dalembert import ProblemData, VData, check_compatibility, transform_data
from .duhamel import (Lattice, NODE_EPS, WaveField, WindowSolution, picard_solve_window,
                      restart_vdata, window_length, _check_horizon)
from .energy import EnergyTrace, energy_trace, release_rate_G0, release_rate_Galpha, sample_times
from .errors import ConvergenceError, DomainError, NonExistenceError, ValidationError
from .geometry import CharMaps, Front

logger = logging.getLogger(__name__)

NON_LIPSCHITZ_DIAGNOSIS = "non-Lipschitz toughness: uniqueness not guaranteed"


# ---------------------------------------------------------------------------
# Toughness
# ---------------------------------------------------------------------------

TOUGHNESS_KINDS = ("constant", "piecewise_constant", "lipschitz_sampled", "sqrt_example",
                   "pointwise_override", "time_dependent_sampled")


@dataclass(frozen=True)
class Toughness:
    """Toughness ``kappa(x)`` (or ``kappa(t, x)``) on ``x >= ell0``.

    Parameters by kind:

    ``constant``
        ``value``.
    ``piecewise_constant``
        ``points`` (jump positions, increasing) and ``values`` (one more than
        points); evaluation is right-continuous.
    ``lipschitz_sampled``
        ``x_points``, ``values``; linear interpolation, constant beyond the samples.
        An optional ``lipschitz`` bound is checked against the samples.
    ``sqrt_example``
        ``kappa = max((1 - sqrt(x - ell0)) / (1 + sqrt(x - ell0)), 1/2) / 2``.
    ``pointwise_override``
        ``value`` everywhere except ``override`` at ``at`` (default ``ell0``).
    ``time_dependent_sampled``
        ``t_points``, ``x_points`` and a ``values`` table indexed ``[t, x]``;
        bilinear, constant beyond the table.
    """

    kind: str
    ell0: float
    params: dict = field(default_factory=dict)
    eps: Optional[float] = None

    def __post_init__(self):
        if self.kind not in TOUGHNESS_KINDS:
            raise ValidationError(f"unknown toughness kind {self.kind!r}")
        p = self.params
        need = {
            "constant": ("value",),
            "piecewise_constant": ("points", "values"),
            "lipschitz_sampled": ("x_points", "values"),
            "sqrt_example": (),
            "pointwise_override": ("value", "override"),
            "time_dependent_sampled": ("t_points", "x_points", "values"),
        }[self.kind]
        for key in need:
            if key not in p:
                raise ValidationError(f"toughness kind {self.kind} needs parameter {key!r}")
        if self.kind == "piecewise_constant":
            pts = np.asarray(p["points"], float)
            vals = np.asarray(p["values"], float)
            if vals.size != pts.size + 1 or np.any(np.diff(pts) <= 0):
                raise ValidationError("piecewise_constant needs increasing points and len(points)+1 values")
        if self.kind == "lipschitz_sampled":
            xs = np.asarray(p["x_points"], float)
            vals = np.asarray(p["values"], float)
            if xs.shape != vals.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
                raise ValidationError("lipschitz_sampled needs increasing x_points matching values")
            if "lipschitz" in p:
                slopes = np.abs(np.diff(vals) / np.diff(xs))
                if np.max(slopes) > float(p["lipschitz"]) * (1 + 1e-12):
                    raise ValidationError("toughness samples exceed the declared Lipschitz constant")
        if self.kind == "time_dependent_sampled":
            ts = np.asarray(p["t_points"], float)
            xs = np.asarray(p["x_points"], float)
            vals = np.asarray(p["values"], float)
            if vals.shape != (ts.size, xs.size):
                raise ValidationError("time_dependent_sampled values must have shape (len(t), len(x))")
        vals = self._sample_values()
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise ValidationError("toughness must be positive and finite")

    def _sample_values(self) -> np.ndarray:
        p = self.params
        if self.kind in ("constant",):
            return np.array([p["value"]], float)
        if self.kind == "pointwise_override":
            return np.array([p["value"], p["override"]], float)
        if self.kind == "sqrt_example":
            return np.array([0.25, 0.5])
        return np.asarray(p["values"], float).ravel()

    @property
    def time_dependent(self) -> bool:
        return self.kind == "time_dependent_sampled"

    @property
    def bounds(self) -> tuple[float, float]:
        """Declared or sampled ``(c1, c2)``."""
        v = self._sample_values()
        return float(np.min(v)), float(np.max(v))

    def __call__(self, x, t=None) -> np.ndarray:
        return toughness_eval(self, x, t)

    def virtual(self, ell_start: float, eps: float) -> "VirtualToughness":
        return VirtualToughness(self, ell_start + eps)


def toughness_eval(kappa: Toughness, x, t=None) -> np.ndarray:
    """Evaluate the toughness (right-continuous at jumps)."""
    x = np.asarray(x, float)
    scale = max(1.0, kappa.ell0)
    if x.size and np.min(x) < kappa.ell0 - 1e-12 * scale:
        raise DomainError(f"toughness requested at x = {np.min(x):.17g} < ell0")
    x = np.maximum(x, kappa.ell0)
    p = kappa.params
    kind = kappa.kind
    if kind == "constant":
        out = np.full(x.shape, float(p["value"]))
    elif kind == "piecewise_constant":
        idx = np.searchsorted(np.asarray(p["points"], float), x, side="right")
        out = np.asarray(p["values"], float)[idx]
    elif kind == "lipschitz_sampled":
        out = np.interp(x, np.asarray(p["x_points"], float), np.asarray(p["values"], float))
    elif kind == "sqrt_example":
        r = np.sqrt(x - kappa.ell0)
        out = 0.5 * np.maximum((1 - r) / (1 + r), 0.5)
    elif kind == "pointwise_override":
        at = float(p.get("at", kappa.ell0))
        out = np.where(np.abs(x - at) <= 1e-14 * scale, float(p["override"]), float(p["value"]))
    else:
        ts = np.asarray(p["t_points"], float)
        xs = np.asarray(p["x_points"], float)
        vals = np.asarray(p["values"], float)
        tt = np.zeros(x.shape) if t is None else np.broadcast_to(np.asarray(t, float), x.shape)
        tt = np.clip(tt, ts[0], ts[-1])
        xc = np.clip(x, xs[0], xs[-1])
        if ts.size == 1:
            out = np.interp(xc, xs, vals[0])
        else:
            k = np.clip(np.searchsorted(ts, tt, side="right") - 1, 0, ts.size - 2)
            w = (tt - ts[k]) / (ts[k + 1] - ts[k])
            lo = np.array([np.interp(a, xs, vals[int(i)]) for a, i in zip(xc.ravel(), k.ravel())]).reshape(x.shape)
            hi = np.array([np.interp(a, xs, vals[int(i) + 1]) for a, i in zip(xc.ravel(), k.ravel())]).reshape(x.shape)
            out = (1 - w) * lo + w * hi
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VirtualToughness:
    """``kappa`` frozen beyond ``x_cap``: a Lipschitz stand-in used inside one window."""

    base: Toughness
    x_cap: float

    def __call__(self, x, t=None):
        return toughness_eval(self.base, np.minimum(np.asarray(x, float), self.x_cap), t)


def front_ode_rhs(G0, kappa_val):
    """Griffith speed ``max((G0 - kappa) / (G0 + kappa), 0)``."""
    G0 = np.asarray(G0, float)
    k = np.asarray(kappa_val, float)
    out = np.maximum((G0 - k) / (G0 + k), 0.0)
    return out if out.ndim else float(out)


def right_lipschitz_probe(kappa: Toughness, x: float, t: Optional[float] = None,
                          hs=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)) -> tuple[bool, np.ndarray]:
    """Difference quotients ``|kappa(x + h) - kappa(x)| / h``; flags unbounded growth as ``h -> 0+``."""
    k0 = float(toughness_eval(kappa, x, t))
    q = np.array([abs(float(toughness_eval(kappa, x + h, t)) - k0) / h for h in hs])
    scale = max(1.0, abs(k0))
    growing = q[-1] > 1e3 * scale and q[-1] > 10 * max(q[len(q) // 2], 1e-300)
    return bool(growing), q


# ---------------------------------------------------------------------------
# Residual report
# ---------------------------------------------------------------------------

@dataclass
class GriffithReport:
    times: np.ndarray
    ell: np.ndarray
    speed: np.ndarray
    G0: np.ndarray
    G_speed: np.ndarray
    kappa: np.ndarray
    window_log: list = field(default_factory=list)
    diagnoses: list = field(default_factory=list)
    termination: str = "horizon reached"

    @property
    def violation(self) -> np.ndarray:
        return np.maximum(self.G_speed - self.kappa, 0.0)

    @property
    def complementarity(self) -> np.ndarray:
        return np.abs((self.G_speed - self.kappa) * self.speed)

    @property
    def max_violation(self) -> float:
        return float(np.max(self.violation)) if self.times.size else 0.0

    @property
    def max_complementarity(self) -> float:
        return float(np.max(self.complementarity)) if self.times.size else 0.0

    @property
    def speed_ok(self) -> bool:
        return bool(np.all((self.speed >= 0) & (self.speed < 1)))

    def columns(self) -> dict[str, np.ndarray]:
        return {"t": self.times, "ell": self.ell, "ell_dot": self.speed, "G0": self.G0,
                "G_ell_dot": self.G_speed, "kappa": self.kappa}


def _front_speed(front: Front, t: np.ndarray) -> np.ndarray:
    """Right slope at each time, except the left slope at the final sample."""
    t = np.asarray(t, float)
    k = np.clip(np.searchsorted(front.t, t, side="right") - 1, 0, front.t.size - 2)
    if t.ndim and t.size > 1:
        # the last sample closes the interval: read the slope from the left
        k[-1] = np.clip(np.searchsorted(front.t, t[-1], side="left") - 1, 0, front.t.size - 2)
    return front.slopes[k]


def griffith_residuals(field_: WaveField, front: Front, kappa, times) -> GriffithReport:
    """Sample Griffith's criterion along a solved pair."""
    times = np.asarray(times, float)
    ell = front.position(np.minimum(times, front.t_end))
    speed = _front_speed(front, times)
    G0 = release_rate_G0(field_, times)
    Gs = (1 - np.minimum(speed, 1 - 1e-15)) / (1 + speed) * G0
    kap = np.asarray(kappa(ell, times) if _takes_time(kappa) else kappa(ell), float)
    return GriffithReport(times=times, ell=ell, speed=speed, G0=G0, G_speed=Gs,
                          kappa=np.broadcast_to(kap, times.shape).copy())


def _takes_time(kappa) -> bool:
    return isinstance(kappa, (Toughness, VirtualToughness))


def _kappa_tx(kappa):
    """Uniform ``kappa(t, x)`` callable for energy accounting."""
    if kappa is None:
        return None
    if _takes_time(kappa):
        return lambda t, x: np.asarray(kappa(x, t), float)
    return lambda t, x: np.asarray(kappa(x), float)


# ---------------------------------------------------------------------------
# Coupled state and the operator Psi
# ---------------------------------------------------------------------------

@dataclass
class CoupledState:
    """Iterate of one coupled window: gap samples and (optionally) the field."""

    vdata: VData
    ell_start: float
    y: np.ndarray
    gap: np.ndarray
    horizon_rel: float
    delta: float
    solution: Optional[WindowSolution] = None
    V: Optional[np.ndarray] = None

    @property
    def lam(self) -> np.ndarray:
        return self.y + self.ell_start + self.gap

    def front(self) -> Front:
        """Window-relative front ``ell(lam(y)) = ell_start + gap(y)`` on ``[0, horizon_rel]``."""
        t = self.lam
        ell = self.ell_start + self.gap
        f = Front(t, ell)
        if f.t_end < self.horizon_rel:
            f = f.extended(self.horizon_rel)
        return f.truncated(self.horizon_rel)


def _y_grid(ell_start: float, band: float, delta: float) -> np.ndarray:
    """``-ell_start`` followed by the lattice columns up to ``band - ell_start`` plus one."""
    i_lo = math.floor(-ell_start / delta) + 1
    i_hi = math.ceil((band - ell_start) / delta) + 1
    cols = np.arange(i_lo, i_hi + 1) * delta
    cols = cols[cols > -ell_start + 1e-9 * delta]
    return np.concatenate([[-ell_start], cols])


def lambda_capital(state: CoupledState, kappa, y=None, sums_solution: Optional[WindowSolution] = None
                   ) -> np.ndarray:
    """``Lambda(y) = B^2 / (2 exp(nu t) kappa(t, x))`` at ``t = lam(y)``, ``x = lam(y) - y``.

    ``B`` is taken from the field of ``sums_solution`` (if any) along the
    current front; beyond the solved band ``Lambda`` is held constant.
    """
    vd = state.vdata
    y_all = state.y if y is None else np.asarray(y, float)
    lam = np.interp(y_all, state.y, state.lam)
    sol = sums_solution if sums_solution is not None else state.solution
    band = sol.lattice.band if sol is not None else state.horizon_rel
    inside = lam <= band
    yy = y_all.copy()
    if not np.all(inside):
        last = np.nonzero(inside)[0]
        k = last[-1] if last.size else 0
        yy[~inside] = yy[k]
        lam = lam.copy()
        lam[~inside] = lam[k]
    B = -2.0 * state_parts_a2dot(state, sol, yy)
    if sol is not None and (sol.coupling != 0 or sol.G is not None):
        B = B - 0.5 * sol.P_at(yy, 2 * lam - yy)
    t_abs = vd.origin + lam
    x = lam - yy
    kap = kappa(x, t_abs) if _takes_time(kappa) else kappa(x)
    return B * B / (2.0 * np.exp(vd.nu * t_abs) * np.asarray(kap, float))


def state_parts_a2dot(state: CoupledState, sol: Optional[WindowSolution], y) -> np.ndarray:
    """``a2'(y)`` for ``y <= 0``: depends on the window's initial slice only."""
    vd = state.vdata
    y = np.asarray(y, float)
    if np.any(y > 1e-12):
        raise DomainError("coupled window reaches characteristics from the left boundary")
    r = np.clip(-y, 0.0, vd.ell0)
    return 0.5 * (-vd.v0.derivative(r) + vd.v1(r))


def gap_from_lambda(y: np.ndarray, Lam: np.ndarray, lam_cap: float) -> np.ndarray:
    """Trapezoidal ``(1/2) * integral of (max(Lambda, 1) - 1)`` from ``y[0]``."""
    rate = 0.5 * (np.clip(np.maximum(Lam, 1.0), 1.0, lam_cap) - 1.0)
    return cumulative_trapezoid(rate, y, initial=0.0)


def apply_Psi(state: CoupledState, kappa, lattice: Lattice, delta_cap: float = 1e-6,
              with_field: bool = True) -> CoupledState:
    """One application of the coupled operator.

    The field part applies the Duhamel operator on the current front; the
    gap part integrates ``(max(Lambda, 1) - 1) / 2`` computed from the
    current field and front.
    """
    front = state.front()
    maps = CharMaps(front, delta=None)
    sol = None
    Vnew = None
    if with_field:
        sol = WindowSolution(state.vdata, maps, lattice, coupling=0.25 * state.vdata.nu ** 2)
        V = state.V if state.V is not None else _initial_field(sol)
        V = np.where(sol.inside, V, 0.0)
        sol.set_field(V)
        Vnew = sol.apply(V)
    Lam = lambda_capital(state, kappa, sums_solution=sol)
    lam_cap = (2.0 - delta_cap) / delta_cap
    gap = gap_from_lambda(state.y, Lam, lam_cap)
    return dataclasses.replace(state, gap=gap, solution=sol, V=Vnew)


def _initial_field(sol: WindowSolution) -> np.ndarray:
    V = np.zeros((sol.lattice.ni, sol.lattice.nj))
    V.ravel()[sol.fi] = sol.A_nodes
    return V


def _metric(old: CoupledState, new: CoupledState, delta: float) -> float:
    d_gap = float(np.max(np.abs(new.gap - old.gap)))
    d_field = 0.0
    if old.V is not None and new.V is not None:
        d_field = math.sqrt(float(np.sum((new.V - old.V) ** 2)) * 0.5 * delta * delta)
    return max(d_gap, d_field)


def coupled_window_size(ell: float, nu: float, vdata: VData, M: float, delta: float,
                        safety: float = 0.9) -> float:
    """Trial window length (a multiple of ``delta``).

    Starts from the contraction bound of the prescribed problem and shrinks
    it until ``integral over the trailing strip of (|v0'| + |v1|)^2 <= M / 2``.
    """
    T = window_length(ell, nu, delta, safety)
    xs = np.linspace(0.0, ell, 2001)
    dens = (np.abs(vdata.v0.derivative(xs)) + np.abs(vdata.v1(xs))) ** 2
    tail = cumulative_trapezoid(dens[::-1], dx=ell / 2000, initial=0.0)   # from x = ell inwards
    ok = tail <= 0.5 * M
    Y = xs[np.nonzero(ok)[0][-1]] if np.any(ok) else 0.0
    Y = max(Y, delta)
    n = max(1, int(math.floor(min(T, Y) / delta + 1e-9)))
    return n * delta


# ---------------------------------------------------------------------------
# Coupled driver
# ---------------------------------------------------------------------------

@dataclass
class CoupledResult:
    field: WaveField
    front: Front
    report: GriffithReport
    trace: Optional[EnergyTrace]
    alternatives: dict = field(default_factory=dict)


class _GateFailure(Exception):
    pass


def _solve_window(vdata: VData, ell_k: float, T_w: float, delta: float, kappa_v, tol: float,
                  max_iter: int, delta_cap: float, seed_gap=None, gate: float = 0.9):
    """Coupled fixed point on one window; returns (solution, front, log)."""
    band = T_w + delta
    y = _y_grid(ell_k, band + 2 * delta, delta)
    gap0 = np.zeros_like(y) if seed_gap is None else seed_gap(y + ell_k)
    horizon_rel = band + delta
    state = CoupledState(vdata=vdata, ell_start=ell_k, y=y, gap=gap0, horizon_rel=horizon_rel,
                         delta=delta)
    field_needed = vdata.nu != 0 or vdata.has_forcing
    # lattice sized for the fastest admissible front
    probe = Front(np.array([0.0, horizon_rel]), np.array([ell_k, ell_k + (1 - delta_cap) * horizon_rel]))
    lattice = Lattice.build(delta, vdata.origin, T_w, probe)
    increments = []
    converged = False
    for it in range(max_iter):
        new = apply_Psi(state, kappa_v, lattice, delta_cap, with_field=field_needed)
        d = _metric(state, new, delta) if (it > 0 or not field_needed) else float(np.max(np.abs(new.gap - state.gap)))
        increments.append(d)
        state = new
        n = len(increments)
        if n >= 3 and increments[-2] > 1e2 * tol and increments[-1] > gate * increments[-2]:
            raise _GateFailure(increments)
        if d <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"coupled iteration did not converge in {max_iter} iterations "
                               f"(last increment {increments[-1]:.3g})")
    front = state.front()
    maps = CharMaps(front)
    init = None
    if field_needed and state.V is not None:
        sol_tmp = WindowSolution(vdata, maps, lattice, coupling=0.25 * vdata.nu ** 2)
        init = np.where(sol_tmp.inside, state.V, 0.0)
    sol, rep = picard_solve_window(vdata, maps, lattice, tol=tol, max_iter=max_iter, initial=init)
    ratios = [b / a for a, b in zip(increments[1:-1], increments[2:]) if a > 1e2 * tol]
    log = {"origin": vdata.origin, "length": T_w, "ell": ell_k, "iterations": len(increments),
           "increments": increments, "max_ratio": max(ratios) if ratios else None}
    return sol, front, state, log


def _tip_check(vdata: VData, kappa: Toughness, ell_k: float, scale: float):
    """Classify the tip: returns ``Lambda_tip``; raises on the non-existence pattern."""
    r = vdata.ell0
    B = -2.0 * 0.5 * (-float(vdata.v0.derivative(r)) + float(vdata.v1(r)))
    t = vdata.origin
    G0 = 0.5 * math.exp(-vdata.nu * t) * B * B
    k_tip = float(toughness_eval(kappa, ell_k, t))
    lam_tip = G0 / k_tip
    if lam_tip > 1 + 1e-9:
        probes = [float(toughness_eval(kappa, ell_k + h * scale, t)) for h in (1e-6, 1e-8, 1e-10)]
        if all(G0 <= k * (1 + 1e-12) for k in probes):
            raise NonExistenceError(
                f"no Lipschitz front from t = {t:.6g}: G0 = {G0:.6g} exceeds the toughness "
                f"{k_tip:.6g} at the tip but not just beyond it (kappa -> {probes[-1]:.6g}); "
                f"the fixed-point front oscillates between speed "
                f"{front_ode_rhs(G0, k_tip):.6g} at the tip and 0 beyond it",
                diagnosis="front oscillation: Griffith speed positive at the tip and zero just "
                          "beyond it; no Lipschitz solution")
    return lam_tip


def coupled_solve(data: ProblemData, kappa: Toughness, delta: float, horizon: float,
                  tol: float = 1e-10, max_iter: int = 200, eps: Optional[float] = None,
                  delta_cap: float = 1e-6, safety: float = 0.9, with_trace: bool = True,
                  max_windows: int = 100000) -> CoupledResult:
    """Solve the coupled problem on ``[0, horizon]``.

    Each window freezes the toughness beyond ``ell_k + eps`` and is cut at
    the lattice time where the front reaches that position.
    """
    comp = check_compatibility(data, order=0)
    if not comp.passed:
        raise ValidationError(f"order-0 compatibility violated: {comp.violations}")
    horizon = _check_horizon(None, horizon, delta)
    if data.w.b < horizon * (1 - 1e-12):
        raise ValidationError("boundary load w does not cover the horizon")
    eps = 0.1 * data.ell0 if eps is None else float(eps)
    vdata = transform_data(data)
    fronts_t = [0.0]
    fronts_l = [data.ell0]
    windows: list[WindowSolution] = []
    log: list = []
    diagnoses: list[str] = []
    alternatives: dict = {}
    T = 0.0
    ell_k = data.ell0
    while T < horizon - 0.5 * delta:
        if len(windows) >= max_windows:
            raise ConvergenceError("too many windows")
        try:
            lam_tip = _tip_check(vdata, kappa, ell_k, max(1.0, data.ell0))
        except NonExistenceError as exc:
            exc.windows = len(windows) + 1
            raise
        seed = None
        if abs(lam_tip - 1.0) <= 1e-6:
            growing, _ = right_lipschitz_probe(kappa, ell_k, T)
            if growing:
                if NON_LIPSCHITZ_DIAGNOSIS not in diagnoses:
                    diagnoses.append(NON_LIPSCHITZ_DIAGNOSIS)
                logger.warning("%s (t = %g, ell = %g)", NON_LIPSCHITZ_DIAGNOSIS, T, ell_k)
                seed = lambda s: 0.1 * s  # noqa: E731  positive seed selects the moving branch
        A_sup = max(vdata.v0.sup_abs(), abs(float(vdata.z(0.0)))) + 0.5 * vdata.v1.sup_abs() * ell_k
        M = 2 * A_sup + 1
        T_w = coupled_window_size(ell_k, data.nu, vdata, M, delta, safety)
        T_w = min(T_w, round((horizon - T) / delta) * delta)
        kappa_v = kappa.virtual(ell_k, eps)
        while True:
            try:
                if seed is not None:
                    stationary = _solve_window(vdata, ell_k, T_w, delta, kappa_v, tol, max_iter,
                                               delta_cap, None)
                    alternatives.setdefault("stationary_branch_window", {
                        "origin": T, "max_gap": float(np.max(stationary[2].gap))})
                sol, front_rel, state, wlog = _solve_window(vdata, ell_k, T_w, delta, kappa_v, tol,
                                                            max_iter, delta_cap, seed)
                break
            except _GateFailure as exc:
                logger.info("contraction gate failed on window at %g (len %g): %s", T, T_w, exc)
                T_w = math.floor(0.5 * T_w / delta + 1e-9) * delta
                if T_w < delta:
                    raise ConvergenceError(
                        f"window halving reached the lattice spacing at t = {T:g}; "
                        "the toughness may not be Lipschitz near the tip")
        # keep only the part where the front stays within the virtual-toughness strip
        L = T_w
        if front_rel.position(min(T_w, front_rel.t_end)) > ell_k + eps:
            t_eps = float(np.interp(ell_k + eps, front_rel.ell, front_rel.t))
            L = max(1, math.floor(t_eps / delta + 1e-9)) * delta
        sol.lattice = dataclasses.replace(sol.lattice, length=L)
        wlog["accepted_length"] = L
        log.append(wlog)
        windows.append(sol)
        seg = front_rel.truncated(L)
        fronts_t.extend((seg.t[1:] + T).tolist())
        fronts_l.extend(seg.ell[1:].tolist())
        T = round((T + L) / delta) * delta
        ell_k = float(seg.ell[-1])
        if T < horizon - 0.5 * delta:
            vdata = restart_vdata(sol, L)
    front = Front(np.array(fronts_t), np.array(fronts_l))
    wf = WaveField(nu=data.nu, delta=delta, front=front, windows=windows)
    times = sample_times(wf.t_end, delta)
    report = griffith_residuals(wf, front, kappa, times)
    report.window_log = log
    report.diagnoses = diagnoses
    trace = energy_trace(wf, data, _kappa_tx(kappa), times) if with_trace else None
    return CoupledResult(field=wf, front=front, report=report, trace=trace, alternatives=alternatives)


def lambda_route_speed(result: CoupledResult, kappa: Toughness, times) -> np.ndarray:
    """Front speed ``(Lambda - 1)/(Lambda + 1)`` from the capital-Lambda route at given times."""
    wf = result.field
    times = np.asarray(times, float)
    out = np.zeros(times.shape)
    ks = wf.window_index(times, left=True)
    for n, (t, k) in enumerate(zip(times, ks)):
        win = wf.windows[int(k)]
        s = t - win.lattice.origin
        y = float(win.maps.phi(s))
        lam = float(win.maps.lam(y)) if win.maps.front.slopes.max() < 1 else s
        B = -2.0 * float(win.parts.a2dot(y)) - 0.5 * float(win.P_at(y, 2 * lam - y))
        x = lam - y
        t_abs = win.lattice.origin + lam
        Lam = B * B / (2 * math.exp(wf.nu * t_abs) * float(toughness_eval(kappa, x, t_abs)))
        Lam = max(Lam, 1.0)
        out[n] = (Lam - 1) / (Lam + 1)
    return out


# ---------------------------------------------------------------------------
# Certification of candidate pairs
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    duhamel_residual: float
    ode_residual_l1: float
    trace_residual: float
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def residuals(self) -> dict[str, float]:
        return {"duhamel": self.duhamel_residual, "ode_l1": self.ode_residual_l1,
                "traces": self.trace_residual}

    @property
    def accepted(self) -> bool:
        return all(math.isfinite(v) and v <= self.tol for v in self.residuals.values())


def verify_solution_pair(field_: WaveField, front: Front, data: ProblemData, kappa,
                         delta: float, tol: float = 1e-2) -> VerificationReport:
    """Certify a (field, front) pair against the coupled system.

    Checks the Duhamel fixed-point residual of the field on its front, the
    L1-in-time residual of the Griffith ODE, and the boundary and initial
    traces.
    """
    duh = 0.0
    for win in field_.windows:
        lat = win.lattice
        V = win.V
        W = win.apply(V)
        keep = (win.node_xi + win.node_eta) <= 2 * lat.length + NODE_EPS * lat.delta
        diff = np.abs(W.ravel()[win.fi] - V.ravel()[win.fi])[keep]
        duh = max(duh, float(np.max(diff)) if diff.size else 0.0)
    times = sample_times(field_.t_end, delta)
    speed = _front_speed(front, times)
    G0 = release_rate_G0(field_, times)
    ell = front.position(np.minimum(times, front.t_end))
    kap = kappa(ell, times) if _takes_time(kappa) else kappa(ell)
    ode = np.abs(speed - front_ode_rhs(G0, kap))
    ode_l1 = float(np.trapezoid(ode, times))
    # boundary traces
    tr = 0.0
    vd0 = field_.windows[0].vdata
    x0 = np.linspace(0.0, front.ell0, 201)
    tr = max(tr, float(np.max(np.abs(field_.v(np.zeros_like(x0), x0) - vd0.v0(x0)))))
    for win in field_.windows:
        s = np.linspace(0.0, win.lattice.length, 11)
        vz = win.values(s, np.zeros_like(s))
        tr = max(tr, float(np.max(np.abs(vz - win.vdata.z(s)))))
    return VerificationReport(duhamel_residual=duh, ode_residual_l1=ode_l1, trace_residual=tr, tol=tol,
                              details={"ode_sup": float(np.max(ode)), "times": times.size})

"""Data handling and the undamped travelling-wave part of the solution.

The damped problem for ``u`` is rewritten for ``v = exp(nu t / 2) u``, which
solves ``v_tt - v_xx = (nu^2 / 4) v + g``.  Its homogeneous part is a
d'Alembert superposition ``A(t, x) = a1(t + x) + a2(t - x)``, where ``a1`` and
``a2`` are fixed by the initial data, the left boundary load and the
reflection off the moving front.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ValidationError
from .geometry import CharMaps, DomainTag, classify_codes

logger = logging.getLogger(__name__)

_EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class SampledFunction:
    """Piecewise-linear function on ``[grid[0], grid[-1]]``.

    Consecutive knots may coincide; such a pair encodes a jump and the
    function is evaluated right-continuously there.  ``deriv`` holds
    optional derivative samples interpolated with the same rule; without
    them the derivative is taken from finite differences of ``values``.
    """

    grid: np.ndarray
    values: np.ndarray
    deriv: Optional[np.ndarray] = None
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValidationError("sampled function needs matching 1-D grid/values with >= 2 knots")
        steps = np.diff(grid)
        if np.any(steps < 0) or not grid[-1] > grid[0]:
            raise ValidationError("sampled function grid must be nondecreasing with positive extent")
        if np.any((steps[:-1] == 0) & (steps[1:] == 0)):
            raise ValidationError("at most two knots may share a position")
        if not np.all(np.isfinite(values)):
            raise ValidationError("sampled function values must be finite")
        deriv = None
        if self.deriv is not None:
            deriv = np.array(self.deriv, dtype=float)
            if deriv.shape != grid.shape:
                raise ValidationError("derivative samples must match the grid")
            deriv.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * steps)])
        for arr in (grid, values, cum):
            arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "deriv", deriv)
        object.__setattr__(self, "_cum", cum)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_callable(cls, func: Callable, a: float, b: float, n: int,
                      dfunc: Optional[Callable] = None) -> "SampledFunction":
        """Sample ``func`` (and optionally its derivative) on ``n`` uniform cells."""
        grid = np.linspace(a, b, max(int(n), 1) + 1)
        deriv = None if dfunc is None else np.broadcast_to(np.asarray(dfunc(grid), float), grid.shape)
        return cls(grid, np.broadcast_to(np.asarray(func(grid), float), grid.shape), deriv)

    @classmethod
    def constant(cls, c: float, a: float, b: float) -> "SampledFunction":
        return cls(np.array([a, b]), np.array([c, c]), np.zeros(2))

    # -- evaluation -------------------------------------------------------
    @property
    def a(self) -> float:
        return float(self.grid[0])

    @property
    def b(self) -> float:
        return float(self.grid[-1])

    def _locate(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        slack = _EDGE_RTOL * max(1.0, abs(self.a), abs(self.b))
        if x.size and (np.min(x) < self.a - slack or np.max(x) > self.b + slack):
            raise DomainError(
                f"evaluation outside [{self.a:.17g}, {self.b:.17g}]: "
                f"[{np.min(x):.17g}, {np.max(x):.17g}]"
            )
        x = np.clip(x, self.a, self.b)
        k = np.clip(np.searchsorted(self.grid, x, side="right") - 1, 0, self.grid.size - 2)
        h = self.grid[k + 1] - self.grid[k]
        dx = x - self.grid[k]
        theta = np.divide(dx, h, out=np.ones_like(dx), where=h > 0)
        return k, theta, dx

    def __call__(self, x) -> np.ndarray:
        k, theta, _ = self._locate(x)
        return self.values[k] + theta * (self.values[k + 1] - self.values[k])

    def derivative(self, x) -> np.ndarray:
        """Derivative from the stored samples, or central differences when absent."""
        d = self.deriv
        if d is None:
            d = self._fd_derivative()
        k, theta, _ = self._locate(x)
        return d[k] + theta * (d[k + 1] - d[k])

    def _fd_derivative(self) -> np.ndarray:
        if np.any(np.diff(self.grid) == 0):
            raise ValidationError("finite-difference derivative needs distinct knots; supply derivative samples")
        return np.gradient(self.values, self.grid, edge_order=1)

    def integral(self, x) -> np.ndarray:
        """Exact ``int_a^x`` of the piecewise-linear interpolant."""
        k, theta, dx = self._locate(x)
        v0 = self.values[k]
        dv = self.values[k + 1] - v0
        return self._cum[k] + dx * (v0 + 0.5 * theta * dv)

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


# ---------------------------------------------------------------------------
# Problem data and the exponential transform
# ---------------------------------------------------------------------------

Forcing = Callable[[np.ndarray, np.ndarray], np.ndarray]


def constant_forcing(value: float) -> Forcing:
    """Spatially and temporally constant load ``f = value``."""
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError("forcing must be finite")

    def f(t, x):
        return np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, value)

    f.bound = abs(value)  # type: ignore[attr-defined]
    f.constant = value  # type: ignore[attr-defined]
    return f


@dataclass(frozen=True)
class ProblemData:
    """Physical data in the ``u`` variable.

    ``u0`` and ``u1`` live on ``[0, ell0]``; ``w`` (the left boundary load)
    lives on ``[0, t_max]`` and must cover every time the solver visits.
    """

    nu: float
    ell0: float
    u0: SampledFunction
    u1: SampledFunction
    w: SampledFunction
    forcing: Optional[Forcing] = None

    def __post_init__(self):
        if self.nu < 0:
            raise ValidationError("damping nu must be nonnegative")
        if self.ell0 <= 0:
            raise ValidationError("ℓ₀ must be positive")
        for name in ("u0", "u1"):
            f = getattr(self, name)
            if abs(f.a) > 1e-12 or abs(f.b - self.ell0) > 1e-9 * self.ell0:
                raise ValidationError(f"{name} must be sampled on [0, ell0]")
        if abs(self.w.a) > 1e-12:
            raise ValidationError("w must be sampled from t = 0")


@dataclass(frozen=True)
class VData:
    """Data of the transformed problem on a window starting at ``origin``.

    Times passed to ``z``, ``zdot`` and ``g`` are relative to ``origin``;
    the exponential weight uses absolute time, so restarted windows solve
    the same equation as the first one.
    """

    nu: float
    origin: float
    v0: SampledFunction
    v1: SampledFunction
    w: SampledFunction
    forcing: Optional[Forcing] = None

    @property
    def ell0(self) -> float:
        return self.v0.b

    def z(self, s) -> np.ndarray:
        t = self.origin + np.asarray(s, dtype=float)
        return np.exp(0.5 * self.nu * t) * self.w(t)

    def zdot(self, s) -> np.ndarray:
        t = self.origin + np.asarray(s, dtype=float)
        return np.exp(0.5 * self.nu * t) * (self.w.derivative(t) + 0.5 * self.nu * self.w(t))

    def g(self, s, x) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.forcing is None:
            return np.zeros(np.broadcast(s, x).shape)
        t = self.origin + s
        return np.exp(0.5 * self.nu * t) * self.forcing(t, x)

    @property
    def has_forcing(self) -> bool:
        return self.forcing is not None


def transform_data(data: ProblemData) -> VData:
    """Map ``(u0, u1, w, f)`` to ``(v0, v1, z, g)`` with ``v = exp(nu t/2) u``."""
    nu = data.nu
    u0, u1 = data.u0, data.u1
    if u0.grid.shape == u1.grid.shape and np.array_equal(u0.grid, u1.grid):
        grid = u0.grid
        v1_vals = u1.values + 0.5 * nu * u0.values
    else:
        # merged knots keep v1 exactly piecewise linear
        grid = np.union1d(u0.grid, u1.grid)
        v1_vals = u1(grid) + 0.5 * nu * u0(grid)
    v1 = SampledFunction(grid, v1_vals)
    return VData(nu=nu, origin=0.0, v0=u0, v1=v1, w=data.w, forcing=data.forcing)


def inverse_transform(vdata: VData) -> tuple[SampledFunction, SampledFunction]:
    """Recover ``(u0, u1)`` at the window origin from ``(v0, v1)``."""
    scale = math.exp(-0.5 * vdata.nu * vdata.origin)
    grid = vdata.v1.grid
    u0 = SampledFunction(vdata.v0.grid, scale * vdata.v0.values,
                         None if vdata.v0.deriv is None else scale * vdata.v0.deriv)
    u1 = SampledFunction(grid, scale * (vdata.v1.values - 0.5 * vdata.nu * vdata.v0(grid)))
    return u0, u1


# ---------------------------------------------------------------------------
# Compatibility
# ---------------------------------------------------------------------------

@dataclass
class CompatibilityReport:
    order: int
    tol: float
    checks: dict[str, float]

    @property
    def violations(self) -> dict[str, float]:
        return {k: v for k, v in self.checks.items() if v > self.tol}

    @property
    def passed(self) -> bool:
        return not self.violations


def check_compatibility(data: ProblemData, order: int = 0,
                        front0_slope: Optional[float] = None,
                        tol: float = 1e-8) -> CompatibilityReport:
    """Corner conditions between initial data, boundary load and front.

    Order 0 checks ``u0(0) = w(0)`` and ``u0(ell0) = 0``.  Order 1 also checks
    ``u1(0) = w'(0)`` and ``u1(ell0) + ell'(0) u0'(ell0) = 0``; the front slope
    defaults to 0 and in the coupled setting is the Griffith speed at ``t = 0``.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    checks = {
        "u0(0)-w(0)": float(abs(data.u0(0.0) - data.w(0.0))),
        "u0(ell0)": float(abs(data.u0(data.ell0))),
    }
    if order == 1:
        slope = 0.0 if front0_slope is None else float(front0_slope)
        checks["u1(0)-w'(0)"] = float(abs(data.u1(0.0) - data.w.derivative(0.0)))
        checks["u1(ell0)+ell'(0)u0'(ell0)"] = float(
            abs(data.u1(data.ell0) + slope * data.u0.derivative(data.ell0)))
    return CompatibilityReport(order=order, tol=tol, checks=checks)


# ---------------------------------------------------------------------------
# Travelling parts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TravellingParts:
    """The two d'Alembert profiles of a window.

    ``a1`` is defined on ``[0, psi(t_end)]`` and ``a2`` on ``[-ell0, ell0]``;
    both are evaluated exactly from the sampled data, so no intermediate
    resampling error is introduced.
    """

    vdata: VData
    maps: CharMaps

    @property
    def ell0(self) -> float:
        return self.maps.ell0

    def _split_a1(self, s):
        s = np.asarray(s, dtype=float)
        ell0 = self.ell0
        if s.size and np.min(s) < -_EDGE_RTOL * ell0:
            raise DomainError("a1 is defined for nonnegative arguments only")
        low = s <= ell0
        return s, low

    def a1(self, s) -> np.ndarray:
        s, low = self._split_a1(s)
        vd = self.vdata
        out = np.empty(s.shape)
        sl = np.maximum(s[low], 0.0)
        out[low] = 0.5 * vd.v0(sl) + 0.5 * vd.v1.integral(sl)
        if np.any(~low):
            r = -self.maps.omega(s[~low])
            out[~low] = -0.5 * vd.v0(r) + 0.5 * vd.v1.integral(r)
        return out

    def a1dot(self, s) -> np.ndarray:
        s, low = self._split_a1(s)
        vd = self.vdata
        out = np.empty(s.shape)
        sl = np.maximum(s[low], 0.0)
        out[low] = 0.5 * (vd.v0.derivative(sl) + vd.v1(sl))
        if np.any(~low):
            r = -self.maps.omega(s[~low])
            wd = self.maps.omega_dot(s[~low])
            out[~low] = 0.5 * wd * (vd.v0.derivative(r) - vd.v1(r))
        return out

    def a2(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        vd = self.vdata
        neg = s <= 0
        out = np.empty(s.shape)
        r = -s[neg]
        out[neg] = 0.5 * vd.v0(r) - 0.5 * vd.v1.integral(r)
        p = s[~neg]
        if p.size:
            out[~neg] = vd.z(p) - 0.5 * vd.v0(p) - 0.5 * vd.v1.integral(p)
        return out

    def a2dot(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        vd = self.vdata
        neg = s <= 0
        out = np.empty(s.shape)
        r = -s[neg]
        out[neg] = 0.5 * (-vd.v0.derivative(r) + vd.v1(r))
        p = s[~neg]
        if p.size:
            out[~neg] = vd.zdot(p) - 0.5 * vd.v0.derivative(p) - 0.5 * vd.v1(p)
        return out


def build_parts(vdata: VData, maps: CharMaps, compat_tol: float = 1e-8) -> TravellingParts:
    """Travelling profiles for the window described by ``vdata`` and ``maps``."""
    if abs(vdata.ell0 - maps.ell0) > 1e-9 * maps.ell0:
        raise ValidationError(
            f"data length {vdata.ell0:.17g} does not match front start {maps.ell0:.17g}")
    scale = max(1.0, vdata.v0.sup_abs(), float(abs(vdata.z(0.0))))
    gaps = {
        "v0(0)-z(0)": float(abs(vdata.v0(0.0) - vdata.z(0.0))),
        "v0(ell0)": float(abs(vdata.v0(vdata.ell0))),
    }
    bad = {k: v for k, v in gaps.items() if v > compat_tol * scale}
    if bad:
        raise ValidationError(f"order-0 compatibility violated: {bad}")
    return TravellingParts(vdata=vdata, maps=maps)


def eval_A(parts: TravellingParts, maps: CharMaps, t, x) -> np.ndarray:
    """Homogeneous solution ``a1(t + x) + a2(t - x)``; zero outside the domain."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    codes = classify_codes(maps, t, x)
    if np.any(codes == DomainTag.OutsidePrimeRegion):
        raise DomainError("A requested beyond the first reflections, where the representation fails")
    out = np.zeros(t.shape)
    inside = codes != DomainTag.OutsideOmega
    if np.any(inside):
        ti, xi = t[inside], x[inside]
        out[inside] = parts.a1(ti + xi) + parts.a2(ti - xi)
    return out if out.ndim else float(out)

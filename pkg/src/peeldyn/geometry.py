"""Characteristic geometry of a domain with a moving right endpoint.

The debonded part of the film occupies ``0 < x < ell(t)``.  Everything the
representation formulas need is expressed through the two null coordinates
``xi = t - x`` and ``eta = t + x`` and through the maps

* ``phi(t) = t - ell(t)``   (xi-coordinate of the front),
* ``psi(t) = t + ell(t)``   (eta-coordinate of the front),
* ``omega = phi o psi^{-1}`` (reflection of a right-going characteristic
  off the front),
* ``lam = phi^{-1}``        (time at which the front sits on a given
  left-going characteristic).

Fronts are monotone piecewise-linear curves, so all of these maps are
piecewise linear as well and are evaluated exactly with ``numpy.interp``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, StructuralError

logger = logging.getLogger(__name__)

# Relative slack used when deciding whether an argument sits on the boundary
# of an interval of definition (pure round-off protection).
_EDGE_RTOL = 1e-12


def _as_float_array(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


def _check_range(arr: np.ndarray, lo: float, hi: float, what: str) -> np.ndarray:
    """Clip ``arr`` into ``[lo, hi]`` after checking it lies there up to round-off."""
    slack = _EDGE_RTOL * max(1.0, abs(lo), abs(hi))
    if arr.size and (np.nanmin(arr) < lo - slack or np.nanmax(arr) > hi + slack):
        raise DomainError(
            f"{what} argument outside [{lo:.17g}, {hi:.17g}]: "
            f"range [{np.nanmin(arr):.17g}, {np.nanmax(arr):.17g}]"
        )
    return np.clip(arr, lo, hi)


class DomainTag(enum.IntEnum):
    """Partition of the quarter plane used by the explicit formulas."""

    OutsideOmega = 0
    Omega1 = 1
    Omega2 = 2
    Omega3 = 3
    OutsidePrimeRegion = 4


@dataclass(frozen=True)
class Front:
    """Monotone piecewise-linear debonding front.

    Parameters
    ----------
    t, ell : array_like
        Breakpoints.  ``t`` is strictly increasing and starts at 0; ``ell`` is
        nondecreasing and starts at the initial length.
    speed_cap : float
        Largest admissible slope between consecutive breakpoints, in (0, 1].
    """

    t: np.ndarray
    ell: np.ndarray
    speed_cap: float = 1.0

    def __post_init__(self):
        t = _as_float_array(self.t).copy()
        ell = _as_float_array(self.ell).copy()
        if t.ndim != 1 or t.shape != ell.shape or t.size < 2:
            raise StructuralError("front needs at least two (t, ell) breakpoints")
        if t[0] != 0.0:
            raise StructuralError("first front breakpoint must be at t = 0")
        if not np.all(np.diff(t) > 0):
            raise StructuralError("front breakpoint times must be strictly increasing")
        if ell[0] <= 0:
            raise StructuralError("initial length must be positive")
        if not 0 < self.speed_cap <= 1:
            raise StructuralError("speed_cap must lie in (0, 1]")
        slopes = np.diff(ell) / np.diff(t)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(ell))))
        if np.any(np.diff(ell) < -tol):
            raise StructuralError("front must be nondecreasing")
        if np.any(slopes > self.speed_cap + 1e-12):
            raise StructuralError(
                f"front slope {slopes.max():.6g} exceeds speed cap {self.speed_cap:.6g}"
            )
        ell = np.maximum.accumulate(ell)
        t.setflags(write=False)
        ell.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "ell", ell)

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, ell0: float, t_end: float) -> "Front":
        return cls(np.array([0.0, t_end]), np.array([ell0, ell0]))

    @classmethod
    def affine(cls, ell0: float, speed: float, t_end: float, speed_cap: float = 1.0) -> "Front":
        return cls(np.array([0.0, t_end]), np.array([ell0, ell0 + speed * t_end]), speed_cap)

    @classmethod
    def from_function(cls, func, t_end: float, n: int, speed_cap: float = 1.0) -> "Front":
        """Sample ``func`` at ``n + 1`` equispaced times on ``[0, t_end]``."""
        t = np.linspace(0.0, t_end, n + 1)
        return cls(t, np.asarray(func(t), dtype=float), speed_cap)

    # -- basic accessors --------------------------------------------------
    @property
    def ell0(self) -> float:
        return float(self.ell[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.ell) / np.diff(self.t)

    def position(self, t) -> np.ndarray:
        """ell(t) for t in [0, t_end]."""
        tt = _check_range(_as_float_array(t), 0.0, self.t_end, "front time")
        return np.interp(tt, self.t, self.ell)

    def slope(self, t, side: str = "right") -> np.ndarray:
        """One-sided slope of the front (the right slope by default)."""
        tt = _check_range(_as_float_array(t), 0.0, self.t_end, "front time")
        k = np.searchsorted(self.t, tt, side="right" if side == "right" else "left") - 1
        k = np.clip(k, 0, self.t.size - 2)
        return self.slopes[k]

    def shifted(self, t0: float) -> "Front":
        """The same front seen from time ``t0``: ``s -> ell(t0 + s)``."""
        if not 0 <= t0 < self.t_end:
            raise DomainError(f"shift {t0} outside [0, {self.t_end})")
        keep = self.t > t0 * (1 + 1e-15) + 1e-300
        ts = np.concatenate([[0.0], self.t[keep] - t0])
        es = np.concatenate([[float(self.position(t0))], self.ell[keep]])
        ts, es = _drop_close_knots(ts, es)
        return Front(ts, es, self.speed_cap)

    def truncated(self, t_end: float) -> "Front":
        """Restriction of the front to ``[0, t_end]``."""
        if not 0 < t_end <= self.t_end * (1 + 1e-14):
            raise DomainError(f"truncation time {t_end} outside (0, {self.t_end}]")
        t_end = min(t_end, self.t_end)
        keep = self.t < t_end
        ts = np.concatenate([self.t[keep], [t_end]])
        es = np.concatenate([self.ell[keep], [float(self.position(t_end))]])
        ts, es = _drop_close_knots(ts, es)
        return Front(ts, es, self.speed_cap)

    def extended(self, t_end: float) -> "Front":
        """Continue the front as stationary up to ``t_end`` (no-op if shorter)."""
        if t_end <= self.t_end:
            return self
        return Front(np.append(self.t, t_end), np.append(self.ell, self.ell[-1]), self.speed_cap)

    def concatenated(self, other: "Front", t0: float) -> "Front":
        """Append ``other`` (expressed relative to ``t0``) after time ``t0``."""
        head = self.truncated(t0) if t0 < self.t_end else self
        ts = np.concatenate([head.t, other.t[1:] + t0])
        es = np.concatenate([head.ell, other.ell[1:]])
        ts, es = _drop_close_knots(ts, es)
        return Front(ts, es, max(self.speed_cap, other.speed_cap))


def _drop_close_knots(ts: np.ndarray, es: np.ndarray, rtol: float = 1e-13):
    """Remove knots closer than round-off to their predecessor (keep the last)."""
    scale = max(1.0, float(ts[-1]))
    keep = np.ones(ts.size, dtype=bool)
    gaps = np.diff(ts) <= rtol * scale
    if np.any(gaps):
        # drop the earlier knot of each tiny gap, but never the first knot
        idx = np.nonzero(gaps)[0]
        for k in idx:
            if k == 0:
                keep[k + 1] = False
            else:
                keep[k] = False
        ts, es = ts[keep], es[keep]
    return ts, es


class MapValues(NamedTuple):
    phi: np.ndarray
    psi: np.ndarray
    omega_psi: np.ndarray
    ell: np.ndarray


@dataclass(frozen=True)
class CharMaps:
    """Characteristic maps derived from a :class:`Front`.

    Parameters
    ----------
    front : Front
    delta : float, optional
        When given, the front must satisfy ``slope <= 1 - delta`` everywhere;
        this is the coupled-mode requirement that makes ``lam`` Lipschitz.
    """

    front: Front
    delta: float | None = None
    _phi: np.ndarray = field(init=False, repr=False)
    _psi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        f = self.front
        if self.delta is not None and np.any(f.slopes > 1.0 - self.delta + 1e-12):
            raise StructuralError(
                f"front slope {f.slopes.max():.6g} violates the cap 1 - delta = {1 - self.delta:.6g}"
            )
        object.__setattr__(self, "_phi", f.t - f.ell)
        object.__setattr__(self, "_psi", f.t + f.ell)

    @property
    def ell0(self) -> float:
        return self.front.ell0

    @property
    def t_end(self) -> float:
        return self.front.t_end

    # -- forward maps -----------------------------------------------------
    def ell(self, t) -> np.ndarray:
        return self.front.position(t)

    def phi(self, t) -> np.ndarray:
        t = _as_float_array(t)
        return t - self.front.position(t)

    def psi(self, t) -> np.ndarray:
        t = _as_float_array(t)
        return t + self.front.position(t)

    # -- inverses and compositions --------------------------------------
    def psi_inv(self, s) -> np.ndarray:
        """Inverse of psi on ``[ell0, psi(t_end)]`` (psi has slope in [1, 2])."""
        s = _check_range(_as_float_array(s), float(self._psi[0]), float(self._psi[-1]), "psi^-1")
        return np.interp(s, self._psi, self.front.t)

    def omega(self, s) -> np.ndarray:
        """Reflection map ``phi(psi^{-1}(s))`` for ``s >= ell0``."""
        s = _as_float_array(s)
        if s.size and np.min(s) < self.ell0 * (1 - _EDGE_RTOL) - _EDGE_RTOL:
            raise DomainError(f"omega requested at {np.min(s):.17g} < ell0 = {self.ell0:.17g}")
        s = _check_range(s, float(self._psi[0]), float(self._psi[-1]), "omega")
        return np.interp(s, self._psi, self._phi)

    def omega_dot(self, s) -> np.ndarray:
        """Right derivative of omega, equal to ``(1 - ell') / (1 + ell')`` at psi^{-1}(s)."""
        s = _check_range(_as_float_array(s), float(self._psi[0]), float(self._psi[-1]), "omega'")
        k = np.clip(np.searchsorted(self._psi, s, side="right") - 1, 0, self._psi.size - 2)
        slope = self.front.slopes[k]
        return (1.0 - slope) / (1.0 + slope)

    def lam(self, y) -> np.ndarray:
        """Inverse of ``phi``: the time at which the front lies on ``t - x = y``."""
        slopes = self.front.slopes
        limit = 1.0 if self.delta is None else 1.0 - self.delta
        if np.any(slopes >= 1.0) or np.any(slopes > limit + 1e-12):
            raise StructuralError("phi is not strictly increasing: front slope reaches the cap")
        y = _check_range(_as_float_array(y), float(self._phi[0]), float(self._phi[-1]), "lambda")
        return np.interp(y, self._phi, self.front.t)

    @property
    def t_star(self) -> float:
        """First time ``t >= ell0`` with ``t = ell(t)``; ``inf`` if not reached."""
        phi = self._phi
        idx = np.nonzero(phi >= 0.0)[0]
        if idx.size == 0:
            return float("inf")
        k = int(idx[0])
        if k == 0:
            return 0.0
        t0, t1 = self.front.t[k - 1], self.front.t[k]
        p0, p1 = phi[k - 1], phi[k]
        return float(t0 + (0.0 - p0) * (t1 - t0) / (p1 - p0))


def eval_maps(maps: CharMaps, t) -> MapValues:
    """Evaluate ``phi``, ``psi``, ``omega(psi(t))`` and ``ell`` at time(s) ``t``."""
    t = _as_float_array(t)
    if t.size and np.min(t) < 0:
        raise DomainError("eval_maps needs t >= 0")
    ell = maps.ell(t)
    phi = t - ell
    psi = t + ell
    return MapValues(phi=phi, psi=psi, omega_psi=maps.omega(psi), ell=ell)


def lambda_eval(maps: CharMaps, y) -> np.ndarray:
    """Time ``lam(y)`` at which the front crosses the characteristic ``t - x = y``."""
    return maps.lam(y)


# ---------------------------------------------------------------------------
# Domain partition
# ---------------------------------------------------------------------------

def classify_codes(maps: CharMaps, t, x) -> np.ndarray:
    """Vectorised :func:`classify`; returns an integer array of DomainTag codes."""
    t = _as_float_array(t)
    x = _as_float_array(x)
    t, x = np.broadcast_arrays(t, x)
    out = np.zeros(t.shape, dtype=np.int8)
    scale = max(1.0, maps.ell0)
    valid = (t >= 0) & (x >= 0) & (t <= maps.t_end * (1 + _EDGE_RTOL))
    ell = np.full(t.shape, -np.inf)
    if np.any(valid):
        ell[valid] = maps.ell(np.minimum(t[valid], maps.t_end))
    inside = valid & (x < ell - _EDGE_RTOL * scale)
    out[inside] = _classify_null(maps.ell0, t[inside] - x[inside], t[inside] + x[inside])
    return out


def _classify_null(ell0: float, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Classify interior points from their null coordinates (tie-breaks included)."""
    code = np.full(xi.shape, int(DomainTag.OutsidePrimeRegion), dtype=np.int8)
    o1 = (xi <= 0) & (eta <= ell0)
    o2 = (xi > 0) & (eta < ell0)
    o3 = (xi < 0) & (eta > ell0)
    code[o3] = DomainTag.Omega3
    code[o2] = DomainTag.Omega2
    code[o1] = DomainTag.Omega1
    return code


def classify(maps: CharMaps, t: float, x: float) -> DomainTag:
    """Tag of the point ``(t, x)`` in the partition of the domain.

    Points with ``t + x = ell0`` and ``t <= x`` and points with ``t = x`` and
    ``t + x < ell0`` are assigned to ``Omega1``; points on or beyond the front
    are ``OutsideOmega``.
    """
    return DomainTag(int(classify_codes(maps, t, x).reshape(-1)[0]))


# ---------------------------------------------------------------------------
# Integration region of the Duhamel term
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Backward region ``R(t, x)`` bounded in ``tau`` by ``gamma1 <= sigma <= gamma2``."""

    anchor: tuple[float, float]
    tag: DomainTag
    breakpoints: tuple[float, ...]
    omega_value: float | None = None
    switch: float | None = None

    def gamma1(self, tau) -> np.ndarray:
        t, x = self.anchor
        tau = _as_float_array(tau)
        if self.tag == DomainTag.Omega2:
            return np.abs(x - t + tau)
        return x - t + tau

    def gamma2(self, tau) -> np.ndarray:
        t, x = self.anchor
        tau = _as_float_array(tau)
        upper = x + t - tau
        if self.tag == DomainTag.Omega3:
            return np.where(tau <= self.switch, tau - self.omega_value, upper)
        return upper

    def area(self) -> float:
        """Exact area (the boundaries are linear between breakpoints)."""
        total = 0.0
        bps = self.breakpoints
        for a, b in zip(bps[:-1], bps[1:]):
            if b <= a:
                continue
            # evaluate just inside the segment to pick the correct branch
            eps = 1e-12 * (b - a)
            wa = float(self.gamma2(a + eps) - self.gamma1(a + eps))
            wb = float(self.gamma2(b - eps) - self.gamma1(b - eps))
            # linear extrapolation back to the endpoints removes the eps shift
            slope = (wb - wa) / ((b - eps) - (a + eps))
            wa -= slope * eps
            wb += slope * eps
            total += 0.5 * (wa + wb) * (b - a)
        return total


def region(maps: CharMaps, t: float, x: float) -> Region:
    """Integration region of the Duhamel term anchored at ``(t, x)``."""
    tag = classify(maps, t, x)
    if tag in (DomainTag.OutsideOmega, DomainTag.OutsidePrimeRegion):
        raise DomainError(f"point ({t}, {x}) is not in the explicit-formula region")
    if tag == DomainTag.Omega1:
        return Region((t, x), tag, (0.0, t))
    if tag == DomainTag.Omega2:
        return Region((t, x), tag, (0.0, t - x, t))
    s = t + x
    switch = float(maps.psi_inv(s))
    return Region((t, x), tag, (0.0, switch, t), omega_value=float(maps.omega(s)), switch=switch)


def front_from_points(points: Sequence[tuple[float, float]], speed_cap: float = 1.0) -> Front:
    """Build a front from a list of ``(t, ell)`` pairs."""
    arr = np.asarray(points, dtype=float)
    return Front(arr[:, 0], arr[:, 1], speed_cap)

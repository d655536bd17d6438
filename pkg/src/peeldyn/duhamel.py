"""Prescribed-front solver: Duhamel representation and Picard iteration.

In null coordinates ``xi = t - x``, ``eta = t + x`` the transformed equation
reads ``v_{xi eta} = F / 4`` with ``F = (nu^2 / 4) v + g``.  Integrating over
the backward region gives

    v = A + J[F] / 4,

where ``J`` is the integral of ``F`` over the region in ``(xi, eta)``
(``dxi deta = 2 dsigma dtau``).  ``J`` is assembled from three prefix
integrals on a lattice with equal spacing in ``xi`` and ``eta``:

* ``P``: along a column (fixed ``xi``) from the lower limit ``|xi|``,
* ``R``: along a row (fixed ``eta``) from ``xi = -eta``,
* ``S``: the area integral, i.e. ``P`` accumulated in ``xi``.

The three subdomains differ only by which part of ``S`` is subtracted,
and the partial derivatives of ``J`` are the matching combinations of
``P`` and ``R``.  Windows start at multiples of the spacing, so successive
lattices coincide and restarted solutions share nodes exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .dalembert import (ProblemData, SampledFunction, TravellingParts, VData, build_parts,
                        check_compatibility, transform_data)
from .errors import ConvergenceError, DomainError, ValidationError
from .geometry import CharMaps, DomainTag, Front, _classify_null
from .kernels import prefix_sums

logger = logging.getLogger(__name__)

#: tolerance (in units of the spacing) for deciding that a node sits on the front
NODE_EPS = 1e-9
#: relative offset used to read one-sided derivatives next to a node
JUMP_EPS = 1e-7


# ---------------------------------------------------------------------------
# Window sizes
# ---------------------------------------------------------------------------

def window_bound(ell: float, nu: float) -> float:
    """Theoretical window length ``min(ell/2, 4/(nu^2 ell)) / 2`` (``ell/4`` for nu = 0)."""
    if nu == 0:
        return 0.25 * ell
    return 0.5 * min(0.5 * ell, 4.0 / (nu * nu * ell))


def window_length(ell: float, nu: float, delta: float, safety: float = 0.9) -> float:
    """Largest multiple of ``delta`` below ``safety`` times :func:`window_bound`."""
    n = math.floor(safety * window_bound(ell, nu) / delta + 1e-9)
    if n < 1:
        raise ValidationError(
            f"spacing {delta:g} is too coarse for a window of length {safety * window_bound(ell, nu):g}")
    return n * delta


# ---------------------------------------------------------------------------
# Lattice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    """Characteristic lattice of one window.

    Node ``(i, j)`` has window-relative null coordinates
    ``xi = (i + i0) * delta`` and ``eta = j * delta``.  Values are solved for
    ``0 <= t <= length + delta``; the extra level lets off-lattice
    evaluations near the top of the window interpolate between solved nodes.
    """

    delta: float
    origin: float
    length: float
    ell_start: float
    i0: int
    ni: int
    nj: int

    @classmethod
    def build(cls, delta: float, origin: float, length: float, rel_front: Front) -> "Lattice":
        if delta <= 0:
            raise ValidationError("lattice spacing must be positive")
        steps = length / delta
        if abs(steps - round(steps)) > 1e-6 or round(steps) < 1:
            raise ValidationError(f"window length {length} is not a positive multiple of {delta}")
        length = round(steps) * delta
        band = length + delta
        if rel_front.t_end < band * (1 - 1e-12):
            raise DomainError("front does not cover the window")
        ell = rel_front.ell0
        i0 = -int(math.ceil(ell / delta)) - 1
        ni = int(round(band / delta)) - i0 + 2
        nj = int(math.ceil(float(rel_front.position(band) + band) / delta)) + 2
        return cls(delta=delta, origin=origin, length=length, ell_start=ell, i0=i0, ni=ni, nj=nj)

    @property
    def band(self) -> float:
        return self.length + self.delta

    @property
    def xi(self) -> np.ndarray:
        return (np.arange(self.ni) + self.i0) * self.delta

    @property
    def eta(self) -> np.ndarray:
        return np.arange(self.nj) * self.delta

    @property
    def top_level(self) -> int:
        """Index ``m`` of the level ``t = m * delta / 2`` at the end of the window."""
        return int(round(2 * self.length / self.delta))


# ---------------------------------------------------------------------------
# One window
# ---------------------------------------------------------------------------

@dataclass
class WindowReport:
    origin: float
    length: float
    ell_start: float
    iterations: int
    increments: list[float]
    converged: bool

    @property
    def contraction(self) -> float:
        """Largest ratio of successive increments past the first one (nan if unavailable)."""
        inc = [x for x in self.increments if x > 0]
        if len(inc) < 3:
            return float("nan")
        r = [b / a for a, b in zip(inc[1:-1], inc[2:])]
        return float(max(r))


class WindowSolution:
    """Field on one window lattice together with the machinery to evaluate it.

    Parameters
    ----------
    vdata : VData
        Data of the window (origin, initial slice, boundary load, forcing).
    maps : CharMaps
        Window-relative characteristic maps.
    lattice : Lattice
    coupling : float
        Coefficient ``c`` in ``F = c * field + g``; ``nu^2 / 4`` for the
        transformed unknown.
    strict : bool
        If false, lattice nodes beyond the first reflections are dropped
        instead of raising (used for stand-alone region integrals).
    """

    def __init__(self, vdata: VData, maps: CharMaps, lattice: Lattice, coupling: float,
                 parts: Optional[TravellingParts] = None, strict: bool = True):
        self.strict = strict
        self.vdata = vdata
        self.maps = maps
        self.lattice = lattice
        self.coupling = float(coupling)
        self.parts = parts if parts is not None else build_parts(vdata, maps)
        self.nu = vdata.nu
        self._sums_cache: Optional[tuple] = None
        self._prepare()
        self.V = np.zeros((lattice.ni, lattice.nj))
        self.iterations = 0
        self.increments: list[float] = []

    # -- geometry --------------------------------------------------------
    def _prepare(self):
        lat = self.lattice
        d = lat.delta
        k = np.arange(lat.ni) + lat.i0          # integer xi index
        j = np.arange(lat.nj)                   # integer eta index
        m = k[:, None] + j[None, :]             # 2 t / delta
        s = j[None, :] - k[:, None]             # 2 x / delta
        m_top = int(round(2 * lat.band / d))
        band_mask = (m >= 0) & (s >= 0) & (m <= m_top)
        t_nodes = 0.5 * d * m
        x_nodes = 0.5 * d * s
        ell_nodes = np.full(m.shape, -np.inf)
        ell_nodes[band_mask] = self.maps.ell(np.clip(t_nodes[band_mask], 0.0, self.maps.t_end))
        inside = band_mask & (x_nodes < ell_nodes - NODE_EPS * d)
        self.band_mask = band_mask
        self.inside = inside
        self.bottom = inside & (m == 0)

        eta_max_front = float(self.maps.psi(self.maps.t_end))
        rows_ok = lat.eta <= eta_max_front * (1 + 1e-13)
        if np.any(inside[:, ~rows_ok]):
            raise DomainError("lattice rows beyond the front's reach contain interior nodes")

        ii, jj = np.nonzero(inside)
        xi_n = (ii + lat.i0) * d
        eta_n = jj * d
        codes = _classify_null(lat.ell_start, xi_n, eta_n + 0.0)
        # ties on the lattice are decided on integer indices
        ell_idx_tol = lat.ell_start * (1 + 1e-13) + 1e-300
        o1 = ((ii + lat.i0) <= 0) & (eta_n <= ell_idx_tol)
        o2 = ((ii + lat.i0) > 0) & (eta_n < lat.ell_start * (1 - 1e-13))
        o3 = ((ii + lat.i0) < 0) & (eta_n > ell_idx_tol)
        codes = np.where(o1, 1, np.where(o2, 2, np.where(o3, 3, codes)))
        bad = (codes != 1) & (codes != 2) & (codes != 3)
        if np.any(bad):
            if self.strict:
                raise DomainError("window reaches beyond the first reflections; shorten it")
            inside[ii[bad], jj[bad]] = False
            keep = ~bad
            ii, jj, xi_n, eta_n, codes = ii[keep], jj[keep], xi_n[keep], eta_n[keep], codes[keep]
        self.node_i, self.node_j = ii, jj
        self.fi = ii * lat.nj + jj
        self.node_xi, self.node_eta = xi_n, eta_n
        self.codes = codes
        self.sel2 = np.nonzero(codes == 2)[0]
        self.corr2 = ii[self.sel2] * lat.nj + (ii[self.sel2] + lat.i0)
        self.sel3 = np.nonzero(codes == 3)[0]

        # per-row reflection data for rows crossing the front
        rows3 = np.nonzero((lat.eta > ell_idx_tol) & rows_ok)[0]
        self.rows3 = rows3
        om = self.maps.omega(lat.eta[rows3]) if rows3.size else np.zeros(0)
        self.row_omega = om
        self.row_omega_dot = self.maps.omega_dot(lat.eta[rows3]) if rows3.size else np.zeros(0)
        pos = om / d - lat.i0
        a = np.clip(np.floor(pos).astype(int), 0, lat.ni - 2)
        self.row_a = a
        self.row_theta = pos - a
        row_lookup = np.full(lat.nj, -1)
        row_lookup[rows3] = np.arange(rows3.size)
        self.j3loc = row_lookup[jj[self.sel3]]

        # travelling parts per row / column
        a1 = np.full(lat.nj, np.nan)
        a1d = np.full(lat.nj, np.nan)
        a1[rows_ok] = self.parts.a1(lat.eta[rows_ok])
        a1d[rows_ok] = self.parts.a1dot(lat.eta[rows_ok])
        cols_ok = lat.xi >= -lat.ell_start * (1 + 1e-13)
        a2 = np.full(lat.ni, np.nan)
        a2d = np.full(lat.ni, np.nan)
        a2[cols_ok] = self.parts.a2(np.maximum(lat.xi[cols_ok], -lat.ell_start))
        a2d[cols_ok] = self.parts.a2dot(np.maximum(lat.xi[cols_ok], -lat.ell_start))
        self.A_nodes = a1[jj] + a2[ii]
        self.At_nodes = a1d[jj] + a2d[ii]
        self.Ax_nodes = a1d[jj] - a2d[ii]
        if not np.all(np.isfinite(self.A_nodes)):
            raise DomainError("travelling parts undefined at an interior node")

        # exact initial slice on the bottom row
        bsel = np.nonzero(m[ii, jj] == 0)[0]
        self.bottom_sel = bsel
        self.bottom_values = self.vdata.v0(x_nodes[ii[bsel], jj[bsel]])

        # source contribution of the load g (extended continuously beyond the front)
        self.G = None
        if self.vdata.has_forcing:
            G = np.zeros((lat.ni, lat.nj))
            xs = np.clip(x_nodes[band_mask], 0.0, np.maximum(ell_nodes[band_mask], 0.0))
            G[band_mask] = self.vdata.g(t_nodes[band_mask], xs)
            if not np.all(np.isfinite(G)):
                raise ValidationError("forcing must be finite on the window")
            self.G = G

    # -- source and prefix sums ------------------------------------------
    def source(self, V: Optional[np.ndarray] = None) -> np.ndarray:
        """``F = coupling * V + g`` on the lattice (``V`` defaults to the stored field)."""
        V = self.V if V is None else V
        F = self.coupling * V if self.coupling != 0 else np.zeros_like(V)
        if self.G is not None:
            F = F + self.G
        return F

    def sums(self, F: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Prefix integrals ``(F, P, R, S)`` (cached for the stored field)."""
        if F is None:
            if self._sums_cache is None:
                Fs = self.source()
                self._sums_cache = (Fs,) + tuple(prefix_sums(Fs, self.lattice.i0, self.lattice.delta))
            return self._sums_cache
        return (F,) + tuple(prefix_sums(F, self.lattice.i0, self.lattice.delta))

    def set_field(self, V: np.ndarray):
        self.V = V
        self._sums_cache = None

    def drop_cache(self):
        self._sums_cache = None

    # -- node operations -------------------------------------------------
    def _row_terms(self, F, P, R, S):
        """``S``, ``R`` and ``P`` evaluated at ``(omega(eta_j), eta_j)`` for rows crossing the front."""
        d = self.lattice.delta
        rows, a, th = self.rows3, self.row_a, self.row_theta
        Pa, Pb = P[a, rows], P[a + 1, rows]
        Fa, Fb = F[a, rows], F[a + 1, rows]
        S_om = S[a, rows] + th * d * (Pa + 0.5 * th * (Pb - Pa))
        R_om = R[a, rows] + th * d * (Fa + 0.5 * th * (Fb - Fa))
        P_om = Pa + th * (Pb - Pa)
        return S_om, R_om, P_om

    def node_J(self, F: np.ndarray) -> np.ndarray:
        """``J[F]`` at interior nodes (ordered like ``self.fi``)."""
        _, P, R, S = self.sums(F)
        Sf = S.ravel()
        J = Sf[self.fi]
        J[self.sel2] -= Sf[self.corr2]
        if self.sel3.size:
            S_om, _, _ = self._row_terms(F, P, R, S)
            J[self.sel3] -= S_om[self.j3loc]
        return J

    def node_J_derivs(self, F: np.ndarray, sums=None) -> tuple[np.ndarray, np.ndarray]:
        """``(J_xi, J_eta)`` at interior nodes."""
        _, P, R, S = sums if sums is not None else self.sums(F)
        Pf, Rf = P.ravel(), R.ravel()
        Jxi = Pf[self.fi]
        Jeta = Rf[self.fi]
        Jxi[self.sel2] -= Rf[self.corr2]
        if self.sel3.size:
            _, R_om, P_om = self._row_terms(F, P, R, S)
            loc = self.j3loc
            Jeta[self.sel3] -= R_om[loc] + self.row_omega_dot[loc] * P_om[loc]
        return Jxi, Jeta

    def apply(self, V: np.ndarray) -> np.ndarray:
        """One application of the Duhamel operator: ``A + J[c V + g] / 4``."""
        F = self.source(V)
        out = np.zeros_like(V)
        flat = out.ravel()
        flat[self.fi] = self.A_nodes + 0.25 * self.node_J(F)
        flat[self.fi[self.bottom_sel]] = self.bottom_values
        return out

    # -- off-lattice evaluation ------------------------------------------
    def _locate(self, xi, eta):
        lat = self.lattice
        d = lat.delta
        pa = np.asarray(xi, float) / d - lat.i0
        pb = np.asarray(eta, float) / d
        a = np.clip(np.floor(pa).astype(int), 0, lat.ni - 2)
        b = np.clip(np.floor(pb).astype(int), 0, lat.nj - 2)
        return a, pa - a, b, pb - b

    def P_at(self, xi, eta, sums=None) -> np.ndarray:
        F, P, R, S = sums if sums is not None else self.sums()
        lat = self.lattice
        d = lat.delta
        a, ta, b, tb = self._locate(xi, eta)
        out = 0.0
        for c, wgt in ((a, 1.0 - ta), (a + 1, ta)):
            lo = np.abs(c + lat.i0)
            Fc, Fn = F[c, b], F[c, b + 1]
            val = P[c, b] + tb * d * (Fc + 0.5 * tb * (Fn - Fc))
            val = np.where(b >= lo, val, 0.0)
            out = out + wgt * val
        return out

    def R_at(self, xi, eta, sums=None) -> np.ndarray:
        F, P, R, S = sums if sums is not None else self.sums()
        lat = self.lattice
        d = lat.delta
        a, ta, b, tb = self._locate(xi, eta)
        out = 0.0
        for r, wgt in ((b, 1.0 - tb), (b + 1, tb)):
            ilo = np.maximum(-r - lat.i0, 0)
            Fr, Fn = F[a, r], F[a + 1, r]
            val = R[a, r] + ta * d * (Fr + 0.5 * ta * (Fn - Fr))
            val = np.where(a >= ilo, val, 0.0)
            out = out + wgt * val
        return out

    def S_at(self, xi, eta, sums=None) -> np.ndarray:
        F, P, R, S = sums if sums is not None else self.sums()
        d = self.lattice.delta
        a, ta, b, tb = self._locate(xi, eta)

        def row_S(r):
            Pa, Pn = P[a, r], P[a + 1, r]
            return S[a, r] + ta * d * (Pa + 0.5 * ta * (Pn - Pa))

        def row_R(r):
            Fa, Fn = F[a, r], F[a + 1, r]
            return R[a, r] + ta * d * (Fa + 0.5 * ta * (Fn - Fa))

        Rb, Rn = row_R(b), row_R(b + 1)
        Sb, Sn = row_S(b), row_S(b + 1)
        # S is accumulated along xi, so its eta-increment over a cell differs
        # from the trapezoid of R where R has a kink (the diagonal); the tb^2
        # term restores exact agreement with the next row.
        mismatch = Sn - Sb - 0.5 * d * (Rb + Rn)
        return Sb + tb * d * (Rb + 0.5 * tb * (Rn - Rb)) + tb * tb * mismatch

    def _split(self, t, x):
        """Classify window-relative points: interior, front, outside."""
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        t, x = np.broadcast_arrays(t, x)
        lat = self.lattice
        tol = NODE_EPS * lat.delta
        if t.size and (np.min(t) < -tol or np.max(t) > lat.band + tol):
            raise DomainError(f"time outside the solved window [0, {lat.band}]")
        tc = np.clip(t, 0.0, lat.band)
        ell = self.maps.ell(tc)
        inside = (x >= -tol) & (x < ell - tol)
        front = (~inside) & (np.abs(x - ell) <= tol)
        return tc, np.clip(x, 0.0, None), ell, inside, front

    def _J_parts(self, xi, eta, sums):
        """``J``, ``J_xi`` and ``J_eta`` at arbitrary interior or front points."""
        codes = _classify_null(self.lattice.ell_start, xi, eta)
        codes = np.where((xi <= 0) & (eta <= self.lattice.ell_start * (1 + 1e-13)), 1, codes)
        if np.any(codes == DomainTag.OutsidePrimeRegion):
            raise DomainError("evaluation point beyond the first reflections")
        J = self.S_at(xi, eta, sums)
        Jxi = self.P_at(xi, eta, sums)
        Jeta = self.R_at(xi, eta, sums)
        c2 = codes == 2
        if np.any(c2):
            J[c2] -= self.S_at(xi[c2], xi[c2], sums)
            Jxi[c2] -= self.R_at(xi[c2], xi[c2], sums)
        c3 = codes == 3
        if np.any(c3):
            e3 = eta[c3]
            om = self.maps.omega(e3)
            omd = self.maps.omega_dot(e3)
            J[c3] -= self.S_at(om, e3, sums)
            Jeta[c3] -= self.R_at(om, e3, sums) + omd * self.P_at(om, e3, sums)
        return J, Jxi, Jeta

    def values(self, t, x) -> np.ndarray:
        """Transformed field at window-relative points (zero on and beyond the front)."""
        tc, xc, ell, inside, front = self._split(t, x)
        out = np.zeros(tc.shape)
        if np.any(inside):
            sums = self.sums()
            xi = tc[inside] - xc[inside]
            eta = tc[inside] + xc[inside]
            J, _, _ = self._J_parts(xi, eta, sums)
            out[inside] = self.parts.a1(eta) + self.parts.a2(xi) + 0.25 * J
        return out

    def derivatives(self, t, x) -> tuple[np.ndarray, np.ndarray]:
        """``(v_t, v_x)`` at window-relative points.

        Points on the front use the formulas as interior one-sided limits;
        points beyond the front get zero.
        """
        tc, xc, ell, inside, front = self._split(t, x)
        vt = np.zeros(tc.shape)
        vx = np.zeros(tc.shape)
        sel = inside | front
        if np.any(sel):
            sums = self.sums()
            xs = np.where(front, ell, xc)[sel]
            ts = tc[sel]
            xi, eta = ts - xs, ts + xs
            _, Jxi, Jeta = self._J_parts(xi, eta, sums)
            d1 = self.parts.a1dot(eta)
            d2 = self.parts.a2dot(xi)
            vt[sel] = d1 + d2 + 0.25 * (Jxi + Jeta)
            vx[sel] = d1 - d2 + 0.25 * (Jeta - Jxi)
        return vt, vx

    def front_B(self, t) -> np.ndarray:
        """``B = -2 a2'(phi) - P[F](phi, psi) / 2`` at window-relative times.

        ``v_x = B / (1 + ell')`` at the front and ``G0 = exp(-nu t) B^2 / 2``.
        """
        t = np.asarray(t, float)
        phi = self.maps.phi(t)
        psi = self.maps.psi(t)
        return -2.0 * self.parts.a2dot(phi) - 0.5 * self.P_at(phi, psi)

    # -- slices ------------------------------------------------------------
    def level_nodes(self, level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Interior nodes on ``t = level * delta / 2``: ``(i, j, x)``."""
        lat = self.lattice
        j = np.arange(lat.nj)
        i = level - lat.i0 - j
        ok = (i >= 0) & (i < lat.ni)
        i, j = i[ok], j[ok]
        keep = self.inside[i, j]
        i, j = i[keep], j[keep]
        x = 0.5 * lat.delta * (2 * j - level)
        return i, j, x

    def level_slice(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Knots ``x`` (interior nodes plus the front) and node values on a level."""
        i, j, x = self.level_nodes(level)
        t = 0.5 * self.lattice.delta * level
        ell = float(self.maps.ell(t))
        xs = np.append(x, ell)
        vs = np.append(self.V[i, j], 0.0)
        return xs, vs

    def restart_data(self, level: Optional[int] = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Slice data ``(x, v, v_t, v_x)`` at a level, with doubled knots at derivative jumps."""
        lat = self.lattice
        level = lat.top_level if level is None else level
        t = 0.5 * lat.delta * level
        xs, vs = self.level_slice(level)
        eps = JUMP_EPS * lat.delta
        n = xs.size
        xl = np.maximum(xs - eps, 0.0)
        xr = xs + eps
        xr[-1] = xs[-1]
        xl[-1] = xs[-1]
        xl[0] = xs[0] if xs[0] == 0 else xl[0]
        tt = np.full(n, t)
        vt_l, vx_l = self.derivatives(tt, np.where(np.arange(n) == n - 1, xs, xl))
        vt_r, vx_r = self.derivatives(tt, np.where(np.arange(n) == n - 1, xs, xr))
        if xs[0] == 0:
            vt_l[0], vx_l[0] = vt_r[0], vx_r[0]
        scale = 1.0 + max(float(np.max(np.abs(vt_r))), float(np.max(np.abs(vx_r))))
        jump = (np.abs(vt_l - vt_r) > 1e-6 * scale) | (np.abs(vx_l - vx_r) > 1e-6 * scale)
        jump[0] = jump[-1] = False
        reps = np.where(jump, 2, 1)
        X = np.repeat(xs, reps)
        Vv = np.repeat(vs, reps)
        # for a doubled knot the first copy carries the left limit
        first = np.cumsum(reps) - reps
        VT = np.repeat(vt_r, reps)
        VX = np.repeat(vx_r, reps)
        VT[first[jump]] = vt_l[jump]
        VX[first[jump]] = vx_l[jump]
        return X, Vv, VT, VX


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

def apply_L(solution: WindowSolution, V: Optional[np.ndarray] = None) -> np.ndarray:
    """Duhamel operator ``A + (nu^2/8) * integral of v + (1/2) * integral of g`` on the lattice."""
    return solution.apply(solution.V if V is None else V)


def picard_solve_window(vdata: VData, maps: CharMaps, lattice: Lattice, tol: float = 1e-10,
                        max_iter: int = 200, initial: Optional[np.ndarray] = None
                        ) -> tuple[WindowSolution, WindowReport]:
    """Fixed point of the Duhamel operator on one window.

    With ``nu = 0`` the source does not depend on the field, so the first
    application is already the fixed point and exactly one iteration is
    performed.
    """
    sol = WindowSolution(vdata, maps, lattice, coupling=0.25 * vdata.nu ** 2)
    V = np.zeros((lattice.ni, lattice.nj))
    if initial is not None:
        V = initial.copy()
    else:
        V.ravel()[sol.fi] = sol.A_nodes
    increments: list[float] = []
    converged = False
    if vdata.nu == 0:
        V = sol.apply(V)
        increments.append(0.0)
        converged = True
    else:
        for _ in range(max_iter):
            W = sol.apply(V)
            inc = float(np.max(np.abs(W - V))) if W.size else 0.0
            increments.append(inc)
            V = W
            if inc <= tol:
                converged = True
                break
    sol.set_field(V)
    sol.iterations = len(increments)
    sol.increments = increments
    report = WindowReport(origin=lattice.origin, length=lattice.length, ell_start=lattice.ell_start,
                          iterations=len(increments), increments=increments, converged=converged)
    logger.debug("window at %.6g: %d iterations, last increment %.3g", lattice.origin,
                 report.iterations, increments[-1] if increments else 0.0)
    if not converged:
        raise ConvergenceError(
            f"Picard iteration did not converge in {max_iter} iterations on the window at t = "
            f"{lattice.origin:g} (last increment {increments[-1]:.3g})", report)
    return sol, report


# ---------------------------------------------------------------------------
# Global field
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    windows: list[WindowReport] = field(default_factory=list)
    t_end: float = 0.0
    truncated: bool = False
    message: str = ""

    @property
    def iterations(self) -> list[int]:
        return [w.iterations for w in self.windows]

    @property
    def final_increments(self) -> list[float]:
        return [w.increments[-1] if w.increments else 0.0 for w in self.windows]

    @property
    def contraction_estimates(self) -> list[float]:
        return [w.contraction for w in self.windows]

    def as_dict(self) -> dict:
        return {
            "windows": [{"T": w.origin, "length": w.length, "ell": w.ell_start,
                         "iterations": w.iterations,
                         "final_increment": w.increments[-1] if w.increments else 0.0,
                         "contraction": None if math.isnan(w.contraction) else w.contraction}
                        for w in self.windows],
            "t_end": self.t_end,
            "truncated": self.truncated,
            "message": self.message,
        }


@dataclass
class WaveField:
    """Stitched field over consecutive windows.

    ``v`` is the transformed unknown; the ``u`` accessors undo the
    exponential weight.  Times are absolute.
    """

    nu: float
    delta: float
    front: Front
    windows: list[WindowSolution] = field(default_factory=list)
    transformed: bool = True

    @property
    def t_end(self) -> float:
        w = self.windows[-1]
        return w.lattice.origin + w.lattice.length

    @property
    def origins(self) -> np.ndarray:
        return np.array([w.lattice.origin for w in self.windows])

    def window_index(self, t, left: bool = False) -> np.ndarray:
        """Window holding each time; a restart time belongs to the later window
        unless ``left`` is set, in which case the earlier window's top slice is used."""
        t = np.asarray(t, float)
        tol = NODE_EPS * self.delta
        if t.size and (np.min(t) < -tol or np.max(t) > self.t_end + tol):
            raise DomainError(f"time outside the solved range [0, {self.t_end}]")
        if left:
            k = np.searchsorted(self.origins, t - tol, side="left") - 1
        else:
            k = np.searchsorted(self.origins, t + tol, side="right") - 1
        return np.clip(k, 0, len(self.windows) - 1)

    def _dispatch(self, t, x, fn, left: bool = False):
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        t, x = np.broadcast_arrays(t, x)
        k = self.window_index(t, left)
        outs = None
        for w in np.unique(k):
            sel = k == w
            win = self.windows[int(w)]
            res = fn(win, t[sel] - win.lattice.origin, x[sel])
            if not isinstance(res, tuple):
                res = (res,)
            if outs is None:
                outs = tuple(np.zeros(t.shape) for _ in res)
            for o, r in zip(outs, res):
                o[sel] = r
        if outs is None:
            outs = (np.zeros(t.shape),)
        return outs

    def _weight(self, t):
        return np.exp(-0.5 * self.nu * np.asarray(t, float)) if self.transformed else 1.0

    def v(self, t, x, left: bool = False) -> np.ndarray:
        return self._dispatch(t, x, lambda w, s, y: w.values(s, y), left)[0]

    def v_derivatives(self, t, x, left: bool = False) -> tuple[np.ndarray, np.ndarray]:
        vt, vx = self._dispatch(t, x, lambda w, s, y: w.derivatives(s, y), left)
        return vt, vx

    def u(self, t, x, left: bool = False) -> np.ndarray:
        return self._weight(t) * self.v(t, x, left)

    def u_derivatives(self, t, x, left: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """``(u_t, u_x)`` from ``u_t = e^{-nu t/2}(v_t - nu v / 2)`` and ``u_x = e^{-nu t/2} v_x``."""
        vt, vx = self.v_derivatives(t, x, left)
        if not self.transformed:
            return vt, vx
        v = self.v(t, x, left)
        e = self._weight(t)
        return e * (vt - 0.5 * self.nu * v), e * vx

    def level_of(self, t: float, left: bool = False) -> tuple[WindowSolution, int]:
        """Window and level index of an absolute time that lies on a half-spacing level."""
        k = int(self.window_index(t, left))
        win = self.windows[k]
        m = 2 * (t - win.lattice.origin) / self.delta
        if abs(m - round(m)) > 1e-6:
            raise DomainError(f"time {t} is not on a lattice level")
        return win, int(round(m))

    def node_slice(self, t: float, left: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Lattice nodes (plus the front knot) on the level ``t`` with ``u`` values."""
        win, m = self.level_of(t, left)
        xs, vs = win.level_slice(m)
        return xs, self._weight(t) * vs

    def iter_nodes(self):
        """Yield ``(t, x, u)`` arrays of interior nodes per window (up to the window end)."""
        for win in self.windows:
            lat = win.lattice
            keep = (win.node_xi + win.node_eta) <= 2 * lat.length + NODE_EPS * lat.delta
            t = lat.origin + 0.5 * (win.node_xi + win.node_eta)[keep]
            x = 0.5 * (win.node_eta - win.node_xi)[keep]
            v = win.V.ravel()[win.fi][keep]
            yield t, x, self._weight(t) * v

    def release_B(self, t, left: bool = False) -> np.ndarray:
        """Front quantity ``B`` (see :meth:`WindowSolution.front_B`) at absolute times."""
        return self._dispatch(t, np.zeros_like(np.asarray(t, float)),
                              lambda w, s, y: w.front_B(s), left)[0]


def field_derivatives(field: WaveField, t: float, x=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(x, v_t, v_x)`` on the slice at absolute time ``t``.

    Without ``x`` the lattice nodes of the level plus the front are used.
    """
    if x is None:
        x, _ = field.node_slice(t)
    vt, vx = field.v_derivatives(np.full(np.shape(x), t), x)
    return np.asarray(x), vt, vx


# ---------------------------------------------------------------------------
# Stand-alone Duhamel integral
# ---------------------------------------------------------------------------

def duhamel_integral(integrand: Union[float, Callable, WaveField], maps: CharMaps, t: float, x: float,
                     delta: float = 1e-3) -> float:
    """Integral of ``integrand`` over the backward region ``R(t, x)`` in ``(sigma, tau)``.

    ``integrand`` is a constant, a vectorised callable ``F(t, x)``, or a
    solved :class:`WaveField` (its transformed field is integrated).
    """
    if isinstance(integrand, WaveField):
        fld = integrand
        fn = lambda tt, xx: fld.v(tt, xx)  # noqa: E731
    elif callable(integrand):
        fn = integrand
    else:
        c = float(integrand)
        fn = lambda tt, xx: np.full(np.shape(tt), c)  # noqa: E731
    length = max(1, math.ceil(t / delta - 1e-9)) * delta
    if maps.t_end < length + delta:
        raise DomainError("region exceeds the front's time range")
    rel = maps.front
    lat = Lattice.build(delta, 0.0, length, rel)
    zero = SampledFunction.constant(0.0, 0.0, maps.ell0)
    w0 = SampledFunction.constant(0.0, 0.0, maps.t_end)
    sol = WindowSolution(VData(0.0, 0.0, zero, zero, w0), maps, lat, coupling=0.0, strict=False)
    k = np.arange(lat.ni) + lat.i0
    j = np.arange(lat.nj)
    tn = 0.5 * delta * (k[:, None] + j[None, :])
    xn = 0.5 * delta * (j[None, :] - k[:, None])
    F = np.zeros((lat.ni, lat.nj))
    mask = sol.band_mask
    F[mask] = fn(tn[mask], xn[mask])
    sums = sol.sums(F)
    xi, eta = np.array([t - x]), np.array([t + x])
    J, _, _ = sol._J_parts(xi, eta, sums)
    return 0.5 * float(J[0])


# ---------------------------------------------------------------------------
# Window chaining
# ---------------------------------------------------------------------------

def restart_vdata(prev: WindowSolution, length: float) -> VData:
    """Data of the next window from the top slice of ``prev``."""
    X, V, VT, VX = prev.restart_data(int(round(2 * length / prev.lattice.delta)))
    v0 = SampledFunction(X, V, VX)
    v1 = SampledFunction(X, VT)
    vd = prev.vdata
    return VData(nu=vd.nu, origin=prev.lattice.origin + length, v0=v0, v1=v1, w=vd.w,
                 forcing=vd.forcing)


def _window_front(front: Front, origin: float, length: float, delta: float) -> Front:
    need = origin + length + 2 * delta
    f = front.extended(need) if front.t_end < need else front
    return f.shifted(origin).truncated(length + 2 * delta)


def _check_horizon(front: Front, horizon: float, delta: float) -> float:
    n = horizon / delta
    if abs(n - round(n)) > 1e-6:
        n = math.ceil(n)
        logger.info("horizon rounded up to %g", n * delta)
    return round(n) * delta


def solve_prescribed(data: ProblemData, front: Front, delta: float, horizon: float,
                     tol: float = 1e-10, max_iter: int = 200, safety: float = 0.9,
                     window: Optional[float] = None) -> tuple[WaveField, SolveReport]:
    """Solve on ``[0, horizon]`` by chaining contraction windows.

    Each window restarts from the value and the analytic time derivative of
    the previous window's top slice.  ``window`` fixes the window length
    (a multiple of ``delta``) instead of the contraction-based choice.
    """
    if abs(front.ell0 - data.ell0) > 1e-12 * data.ell0:
        raise ValidationError("front and data disagree on the initial length")
    comp = check_compatibility(data, order=0)
    if not comp.passed:
        raise ValidationError(f"order-0 compatibility violated: {comp.violations}")
    horizon = _check_horizon(front, horizon, delta)
    if data.w.b < horizon * (1 - 1e-12):
        raise ValidationError("boundary load w does not cover the horizon")
    vdata = transform_data(data)
    fieldv = WaveField(nu=data.nu, delta=delta, front=front)
    report = SolveReport()
    T = 0.0
    while T < horizon - 0.5 * delta:
        ell_k = float(front.extended(T + delta).position(T))
        L = window if window is not None else window_length(ell_k, data.nu, delta, safety)
        L = min(L, round((horizon - T) / delta) * delta)
        rel = _window_front(front, T, L, delta)
        maps = CharMaps(rel)
        lat = Lattice.build(delta, T, L, rel)
        sol, wrep = picard_solve_window(vdata, maps, lat, tol=tol, max_iter=max_iter)
        fieldv.windows.append(sol)
        report.windows.append(wrep)
        T = round((T + L) / delta) * delta
        if T < horizon - 0.5 * delta:
            vdata = restart_vdata(sol, L)
            _check_restart(vdata, sol)
    report.t_end = T
    t_star = CharMaps(front.extended(max(horizon, front.t_end))).t_star
    if t_star < horizon:
        report.message = (f"front meets t = ell(t) at t* = {t_star:.6g}; solution continued by "
                          "window restarts")
    return fieldv, report


def _check_restart(vdata: VData, prev: WindowSolution, tol: float = 1e-8):
    scale = 1.0 + vdata.v0.sup_abs()
    g0 = abs(float(vdata.v0(0.0)) - float(vdata.z(0.0)))
    g1 = abs(float(vdata.v0(vdata.ell0)))
    if g0 > tol * scale or g1 > tol * scale:
        raise ValidationError(f"restart compatibility violated at t = {vdata.origin:g}: {g0:.3g}, {g1:.3g}")


# ---------------------------------------------------------------------------
# Direct solve for u through its time derivative
# ---------------------------------------------------------------------------

def solve_u_route(data: ProblemData, front: Front, delta: float, horizon: float,
                  tol: float = 1e-10, max_iter: int = 200, safety: float = 0.9) -> tuple[WaveField, SolveReport]:
    """Solve for ``u`` without the exponential transform.

    ``u = U_hat - (nu/2) * integral of u_t``, with ``U_hat`` the undamped
    d'Alembert part of the ``u``-data.  The iteration runs on ``u_t`` at the
    nodes; ``u`` then follows from one more quadrature.  This path exists as
    a consistency check of the transformed solver.
    """
    horizon = _check_horizon(front, horizon, delta)
    nu = data.nu
    vdata = VData(nu=0.0, origin=0.0, v0=data.u0, v1=data.u1, w=data.w, forcing=None)
    if data.forcing is not None:
        raise ValidationError("the direct u-route does not support forcing")
    fieldu = WaveField(nu=nu, delta=delta, front=front, transformed=False)
    report = SolveReport()
    T = 0.0
    while T < horizon - 0.5 * delta:
        ell_k = float(front.extended(T + delta).position(T))
        L = min(window_length(ell_k, nu, delta, safety), round((horizon - T) / delta) * delta)
        rel = _window_front(front, T, L, delta)
        maps = CharMaps(rel)
        lat = Lattice.build(delta, T, L, rel)
        sol = WindowSolution(vdata, maps, lat, coupling=-nu)
        U = np.zeros((lat.ni, lat.nj))
        U.ravel()[sol.fi] = sol.At_nodes
        increments = []
        converged = False
        for _ in range(max_iter):
            F = sol.source(U)
            Jxi, Jeta = sol.node_J_derivs(F)
            W = np.zeros_like(U)
            W.ravel()[sol.fi] = sol.At_nodes + 0.25 * (Jxi + Jeta)
            inc = float(np.max(np.abs(W - U)))
            increments.append(inc)
            U = W
            if inc <= tol or nu == 0:
                converged = True
                break
        if not converged:
            raise ConvergenceError("u-route iteration did not converge")
        # u from one quadrature of -nu u_t; the stored field then is u itself
        Uvals = np.zeros_like(U)
        Uvals.ravel()[sol.fi] = sol.A_nodes + 0.25 * sol.node_J(sol.source(U))
        Uvals.ravel()[sol.fi[sol.bottom_sel]] = sol.bottom_values
        sol.V = Uvals
        sol._ut = U
        sol._sums_cache = (sol.source(U),) + tuple(prefix_sums(sol.source(U), lat.i0, delta))
        sol.iterations = len(increments)
        sol.increments = increments
        fieldu.windows.append(sol)
        report.windows.append(WindowReport(T, L, ell_k, len(increments), increments, converged))
        T = round((T + L) / delta) * delta
        if T < horizon - 0.5 * delta:
            X, Vv, VT, VX = sol.restart_data(lat.top_level)
            vdata = VData(nu=0.0, origin=T, v0=SampledFunction(X, Vv, VX),
                          v1=SampledFunction(X, VT), w=data.w)
    report.t_end = T
    return fieldu, report

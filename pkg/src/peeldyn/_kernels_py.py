"""Pure-numpy prefix sums over the characteristic lattice.

This is the reference implementation of the hot kernel; the compiled
module ``peeldyn._kernels`` computes the same arrays with explicit loops.
"""

from __future__ import annotations

import numpy as np


def prefix_sums(F: np.ndarray, i0: int, delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column, row and area prefix integrals of ``F`` sampled on the lattice.

    Node ``(i, j)`` sits at ``xi = (i + i0) * delta`` and ``eta = j * delta``.

    Returns
    -------
    P : ndarray
        ``P[i, j]``: trapezoidal integral of ``F(xi_i, .)`` over
        ``eta in [|xi_i|, eta_j]`` (zero when ``eta_j <= |xi_i|``).
    R : ndarray
        ``R[i, j]``: trapezoidal integral of ``F(., eta_j)`` over
        ``xi in [-eta_j, xi_i]`` (the lower limit is clipped to the lattice).
    S : ndarray
        ``S[i, j]``: trapezoidal integral of ``P(., eta_j)`` over ``xi <= xi_i``.
    """
    F = np.ascontiguousarray(F, dtype=float)
    ni, nj = F.shape
    h = 0.5 * delta
    # column prefix from eta = 0, then re-based at the lower limit |xi|
    C = np.zeros_like(F)
    np.cumsum(h * (F[:, 1:] + F[:, :-1]), axis=1, out=C[:, 1:])
    lo = np.abs(np.arange(ni) + i0)
    lo_c = np.minimum(lo, nj - 1)
    P = C - C[np.arange(ni), lo_c][:, None]
    P[np.arange(nj)[None, :] <= lo[:, None]] = 0.0

    D = np.zeros_like(F)
    np.cumsum(h * (F[1:, :] + F[:-1, :]), axis=0, out=D[1:, :])
    ilo = np.clip(-np.arange(nj) - i0, 0, ni - 1)
    R = D - D[ilo, np.arange(nj)][None, :]
    R[np.arange(ni)[:, None] <= ilo[None, :]] = 0.0

    S = np.zeros_like(F)
    np.cumsum(h * (P[1:, :] + P[:-1, :]), axis=0, out=S[1:, :])
    return P, R, S

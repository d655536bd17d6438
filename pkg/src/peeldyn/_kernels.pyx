# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled prefix sums over the characteristic lattice.

Same contract as ``peeldyn._kernels_py.prefix_sums``: one fused sweep
builds the column integral ``P``, the row integral ``R`` and the area
integral ``S`` with running sums instead of cumsum-and-rebase.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def prefix_sums(F, long i0, double delta):
    cdef double[:, ::1] f = np.ascontiguousarray(F, dtype=np.float64)
    cdef Py_ssize_t ni = f.shape[0]
    cdef Py_ssize_t nj = f.shape[1]
    P_arr = np.zeros((ni, nj), dtype=np.float64)
    R_arr = np.zeros((ni, nj), dtype=np.float64)
    S_arr = np.zeros((ni, nj), dtype=np.float64)
    cdef double[:, ::1] P = P_arr
    cdef double[:, ::1] R = R_arr
    cdef double[:, ::1] S = S_arr
    cdef double h = 0.5 * delta
    cdef Py_ssize_t i, j, lo, ilo
    cdef double acc
    with nogil:
        for i in range(ni):
            lo = i + i0
            if lo < 0:
                lo = -lo
            acc = 0.0
            for j in range(lo + 1, nj):
                acc = acc + h * (f[i, j - 1] + f[i, j])
                P[i, j] = acc
            if i > 0:
                for j in range(nj):
                    ilo = -j - i0
                    if ilo < 0:
                        ilo = 0
                    if i > ilo:
                        R[i, j] = R[i - 1, j] + h * (f[i - 1, j] + f[i, j])
                    S[i, j] = S[i - 1, j] + h * (P[i - 1, j] + P[i, j])
    return P_arr, R_arr, S_arr

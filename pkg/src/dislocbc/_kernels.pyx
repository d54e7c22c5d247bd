# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bond-sum kernels (same contract as ``_kernels_py``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def pair_energy_gradient(double[:, ::1] U, long[::1] site_idx, long[:, ::1] partner,
                         double[:, :, ::1] jump, double[:, ::1] cart,
                         double[::1] k, double[::1] a, double[::1] b, bint want_grad=True):
    cdef Py_ssize_t m = U.shape[0], N = U.shape[1]
    cdef Py_ssize_t n = partner.shape[0], K = partner.shape[1]
    cdef Py_ssize_t i, r, c, li, pi
    cdef double x, y0, y1, L, dphi, energy = 0.0, s0, s1
    cdef double[::1] rlen = np.empty(K)
    grad_arr = np.zeros((m, N)) if want_grad else None
    cdef double[:, ::1] G
    if want_grad:
        G = grad_arr
    for r in range(K):
        rlen[r] = sqrt(cart[r, 0] * cart[r, 0] + cart[r, 1] * cart[r, 1])
    for i in range(n):
        li = site_idx[i]
        for r in range(K):
            pi = partner[i, r]
            if N == 1:
                x = U[pi, 0] - U[li, 0] + jump[i, r, 0]
            else:
                s0 = U[pi, 0] - U[li, 0] + jump[i, r, 0]
                s1 = U[pi, 1] - U[li, 1] + jump[i, r, 1]
                y0 = cart[r, 0] + s0
                y1 = cart[r, 1] + s1
                L = sqrt(y0 * y0 + y1 * y1)
                x = L - rlen[r]
            energy += x * x * (0.5 * k[r] + x * (a[r] + 0.25 * b[r] * x))
            if want_grad:
                dphi = x * (k[r] + x * (3.0 * a[r] + b[r] * x))
                if N == 1:
                    G[pi, 0] += dphi
                    G[li, 0] -= dphi
                else:
                    dphi /= L
                    G[pi, 0] += dphi * y0
                    G[pi, 1] += dphi * y1
                    G[li, 0] -= dphi * y0
                    G[li, 1] -= dphi * y1
    return energy, grad_arr

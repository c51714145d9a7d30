# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled decentralized round; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def decentralized_step(const double[:, ::1] est, const double[:, ::1] v,
                       const double[:, ::1] lam, const double[:, ::1] lam_prev,
                       const double[:, ::1] W, const double[:, ::1] C,
                       const double[:, ::1] M, const double[::1] c,
                       const double[:, ::1] A, const cnp.intp_t[::1] owner,
                       const cnp.intp_t[::1] offsets,
                       double alpha, double beta, double gamma):
    cdef Py_ssize_t N = est.shape[0]
    cdef Py_ssize_t n = est.shape[1]
    cdef Py_ssize_t m = v.shape[1]
    cdef Py_ssize_t i, j, k, r, o
    cdef double w, acc, d, a0, a1, a2, a3

    est_next_arr = np.zeros((N, n))
    v_next_arr = np.empty((N, m))
    lam_next_arr = np.empty((N, m))
    a_dx_arr = np.zeros((N, m))
    x_new_arr = np.empty(n)
    cdef double[:, ::1] est_next = est_next_arr
    cdef double[:, ::1] v_next = v_next_arr
    cdef double[:, ::1] lam_next = lam_next_arr
    cdef double[:, ::1] a_dx = a_dx_arr
    cdef double[::1] x_new = x_new_arr

    with nogil:
        # consensus mixing of every copy
        for i in range(N):
            for j in range(N):
                w = W[i, j]
                if w != 0.0:
                    for k in range(n):
                        est_next[i, k] += w * est[j, k]
        # own-block gradient step, evaluated at the owner's copy
        for k in range(n):
            o = owner[k]
            # four partial sums let the compiler pipeline the dot product
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            a3 = 0.0
            j = 0
            while j + 4 <= n:
                a0 = a0 + M[k, j] * est[o, j]
                a1 = a1 + M[k, j + 1] * est[o, j + 1]
                a2 = a2 + M[k, j + 2] * est[o, j + 2]
                a3 = a3 + M[k, j + 3] * est[o, j + 3]
                j = j + 4
            while j < n:
                a0 = a0 + M[k, j] * est[o, j]
                j = j + 1
            acc = c[k] + ((a0 + a1) + (a2 + a3))
            for r in range(m):
                acc = acc + A[r, k] * lam[o, r]
            x_new[k] = est_next[o, k] - alpha * acc
        for k in range(n):
            o = owner[k]
            d = x_new[k] - est[o, k]
            for r in range(m):
                a_dx[o, r] += A[r, k] * d
            est_next[o, k] = x_new[k]
        # auxiliary dual recursion and projection
        for i in range(N):
            for r in range(m):
                acc = v[i, r] + (lam[i, r] - lam_prev[i, r]) + beta * a_dx[i, r]
                for j in range(N):
                    w = C[i, j]
                    if w != 0.0:
                        acc = acc - w * (gamma * v[j, r] + (lam[j, r] - lam_prev[j, r]))
                v_next[i, r] = acc
                lam_next[i, r] = acc if acc > 0.0 else 0.0
    return est_next_arr, v_next_arr, lam_next_arr

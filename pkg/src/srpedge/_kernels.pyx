# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SRP inner loops. Signatures and results match ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def edge_accumulate(const double[:, ::1] re_g, const double[:, ::1] im_g,
                    const double[:, ::1] cos_w, const double[:, ::1] sin_w,
                    const cnp.intp_t[::1] row_pair, const cnp.intp_t[::1] row_n,
                    const double[:, ::1] coef, const double[:, ::1] lags):
    cdef Py_ssize_t R = row_pair.shape[0]
    cdef Py_ssize_t B = re_g.shape[1]
    cdef Py_ssize_t Q = coef.shape[1]
    cdef Py_ssize_t r, k, q, p, n
    cdef double rs, is_
    out = np.zeros(Q, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(R):
            p = row_pair[r]
            n = row_n[r]
            if n == 0:
                # cos(0) = 1: plain sum, endpoint bins carry half weight
                rs = 0.0
                for k in range(B):
                    rs = rs + re_g[p, k]
                rs = 2.0 * rs - re_g[p, 0] - re_g[p, B - 1]
                for q in range(Q):
                    o[q] += coef[r, q] * rs
            else:
                rs = 0.0
                is_ = 0.0
                for k in range(B):
                    rs = rs + re_g[p, k] * cos_w[n, k]
                    is_ = is_ + im_g[p, k] * sin_w[n, k]
                is_ = -n * is_
                for q in range(Q):
                    o[q] += coef[r, q] * (lags[p, q] * rs + is_)
    return out


def lc_accumulate(const double[:, ::1] re_g, const double[:, ::1] im_g,
                  const double[:, ::1] cos_w, const double[:, ::1] sin_w,
                  const cnp.intp_t[::1] row_pair, const cnp.intp_t[::1] row_n,
                  const double[:, ::1] sinc):
    cdef Py_ssize_t R = row_pair.shape[0]
    cdef Py_ssize_t B = re_g.shape[1]
    cdef Py_ssize_t Q = sinc.shape[1]
    cdef Py_ssize_t r, k, q, p, n, a
    cdef double g, sgn, rc, si
    out = np.zeros(Q, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(R):
            p = row_pair[r]
            n = row_n[r]
            a = n if n >= 0 else -n
            sgn = 1.0 if n >= 0 else -1.0
            rc = 0.0
            si = 0.0
            for k in range(B):
                rc = rc + re_g[p, k] * cos_w[a, k]
                si = si + im_g[p, k] * sin_w[a, k]
            g = rc - sgn * si
            for q in range(Q):
                o[q] += sinc[r, q] * g
    return out


def td_gather(const double[:, ::1] gcc_td, const cnp.intp_t[:, ::1] lags):
    cdef Py_ssize_t P = lags.shape[0]
    cdef Py_ssize_t Q = lags.shape[1]
    cdef Py_ssize_t p, q
    out = np.zeros(Q, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for p in range(P):
            for q in range(Q):
                o[q] += gcc_td[p, lags[p, q]]
        for q in range(Q):
            o[q] = 2.0 * o[q]
    return out

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"

cdef double _G = 0.5 / sqrt(3.0)


cdef inline double _svk(double* F, double lam, double mu) noexcept nogil:
    cdef double E[9]
    cdef int i, j, k
    cdef double s, tr = 0.0, frob = 0.0
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += F[3 * k + i] * F[3 * k + j]
            if i == j:
                s -= 1.0
            E[3 * i + j] = 0.5 * s
    for i in range(9):
        frob += E[i] * E[i]
    tr = E[0] + E[4] + E[8]
    return mu * frob + 0.5 * lam * tr * tr


def svk_density(F, double lam, double mu):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] flat = np.ascontiguousarray(
        np.asarray(F, dtype=np.float64).reshape(-1, 9))
    cdef Py_ssize_t n = flat.shape[0], p
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double* base = &flat[0, 0] if n > 0 else NULL
    with nogil:
        for p in range(n):
            out[p] = _svk(base + 9 * p, lam, mu)
    shape = np.shape(F)[:-2]
    return out.reshape(shape) if len(shape) else float(out[0])


cdef inline void _gauss_grad(double[:, :, :, ::1] y, Py_ssize_t a, Py_ssize_t b,
                             Py_ssize_t c, double t1, double t2, double t3,
                             double c1, double c2, double c3, double* F) noexcept nogil:
    cdef int comp
    cdef double g1, g2, g3
    for comp in range(3):
        g1 = ((1 - t2) * (1 - t3) * (y[a + 1, b, c, comp] - y[a, b, c, comp])
              + t2 * (1 - t3) * (y[a + 1, b + 1, c, comp] - y[a, b + 1, c, comp])
              + (1 - t2) * t3 * (y[a + 1, b, c + 1, comp] - y[a, b, c + 1, comp])
              + t2 * t3 * (y[a + 1, b + 1, c + 1, comp] - y[a, b + 1, c + 1, comp]))
        g2 = ((1 - t1) * (1 - t3) * (y[a, b + 1, c, comp] - y[a, b, c, comp])
              + t1 * (1 - t3) * (y[a + 1, b + 1, c, comp] - y[a + 1, b, c, comp])
              + (1 - t1) * t3 * (y[a, b + 1, c + 1, comp] - y[a, b, c + 1, comp])
              + t1 * t3 * (y[a + 1, b + 1, c + 1, comp] - y[a + 1, b, c + 1, comp]))
        g3 = ((1 - t1) * (1 - t2) * (y[a, b, c + 1, comp] - y[a, b, c, comp])
              + t1 * (1 - t2) * (y[a + 1, b, c + 1, comp] - y[a + 1, b, c, comp])
              + (1 - t1) * t2 * (y[a, b + 1, c + 1, comp] - y[a, b + 1, c, comp])
              + t1 * t2 * (y[a + 1, b + 1, c + 1, comp] - y[a + 1, b + 1, c, comp]))
        F[3 * comp + 0] = c1 * g1
        F[3 * comp + 1] = c2 * g2
        F[3 * comp + 2] = c3 * g3


def hex_gauss_gradients(y, spacing, scale):
    cdef double[:, :, :, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n1 = yv.shape[0] - 1, n2 = yv.shape[1] - 1, n3 = yv.shape[2] - 1
    cdef Py_ssize_t a, b, c
    cdef int g1, g2, g3, k
    cdef double c1 = scale[0] / spacing[0], c2 = scale[1] / spacing[1]
    cdef double c3 = scale[2] / spacing[2]
    cdef double gx[2]
    cdef double F[9]
    gx[0] = 0.5 - _G
    gx[1] = 0.5 + _G
    out = np.empty((n1, n2, n3, 8, 3, 3))
    cdef double[:, :, :, :, :, ::1] ov = out
    with nogil:
        for a in range(n1):
            for b in range(n2):
                for c in range(n3):
                    for g1 in range(2):
                        for g2 in range(2):
                            for g3 in range(2):
                                _gauss_grad(yv, a, b, c, gx[g1], gx[g2], gx[g3], c1, c2, c3, F)
                                for k in range(9):
                                    ov[a, b, c, 4 * g1 + 2 * g2 + g3, k // 3, k % 3] = F[k]
    return out


def svk_hex_energy(y, spacing, scale, double lam, double mu):
    cdef double[:, :, :, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n1 = yv.shape[0] - 1, n2 = yv.shape[1] - 1, n3 = yv.shape[2] - 1
    cdef Py_ssize_t a, b, c
    cdef int g1, g2, g3
    cdef double c1 = scale[0] / spacing[0], c2 = scale[1] / spacing[1]
    cdef double c3 = scale[2] / spacing[2]
    cdef double vol = spacing[0] * spacing[1] * spacing[2]
    cdef double gx[2]
    cdef double F[9]
    cdef double acc
    gx[0] = 0.5 - _G
    gx[1] = 0.5 + _G
    out = np.empty((n1, n2, n3))
    cdef double[:, :, ::1] ov = out
    with nogil:
        for a in range(n1):
            for b in range(n2):
                for c in range(n3):
                    acc = 0.0
                    for g1 in range(2):
                        for g2 in range(2):
                            for g3 in range(2):
                                _gauss_grad(yv, a, b, c, gx[g1], gx[g2], gx[g3], c1, c2, c3, F)
                                acc += _svk(F, lam, mu)
                    ov[a, b, c] = vol * acc / 8.0
    return out


def subset_perimeters(face_u, face_v, long long start, long long count):
    cdef cnp.int64_t[::1] fu = np.ascontiguousarray(face_u, dtype=np.int64)
    cdef cnp.int64_t[::1] fv = np.ascontiguousarray(face_v, dtype=np.int64)
    cdef Py_ssize_t nf = fu.shape[0], f
    per = np.zeros(count, dtype=np.int32)
    vol = np.zeros(count, dtype=np.int32)
    cdef int[::1] pv = per
    cdef int[::1] vv = vol
    cdef long long i, m, x
    cdef int p, v
    with nogil:
        for i in range(count):
            m = start + i
            p = 0
            for f in range(nf):
                p += ((m >> fu[f]) ^ (m >> fv[f])) & 1
            pv[i] = p
            v = 0
            x = m
            while x:
                x &= x - 1
                v += 1
            vv[i] = v
    return per, vol

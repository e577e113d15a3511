# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, fabs, isfinite, M_PI

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex csin(double complex)
    double complex ccos(double complex)
    double complex cexp(double complex)
    double complex clog(double complex)
    double creal(double complex)
    double cimag(double complex)

BACKEND = "cython"

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _wrap(double x) nogil:
    return x - TWO_PI * ceil((x - M_PI) / TWO_PI)


def wrap_angle(x):
    cdef const double[::1] a = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = a.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _wrap(a[i])
    return out.reshape(np.shape(x))


def psi_closed_form(z, poly, log_b, log_lam, pp_b, pp_ptr, pp_coef, double complex constant):
    shape = np.shape(z)
    cdef const double complex[::1] zz = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    cdef const double complex[::1] P = np.ascontiguousarray(poly, dtype=np.complex128)
    cdef const double complex[::1] LB = np.ascontiguousarray(log_b, dtype=np.complex128)
    cdef const double complex[::1] LL = np.ascontiguousarray(log_lam, dtype=np.complex128)
    cdef const double complex[::1] PB = np.ascontiguousarray(pp_b, dtype=np.complex128)
    cdef const long long[::1] PTR = np.ascontiguousarray(pp_ptr, dtype=np.int64)
    cdef const double complex[::1] PC = np.ascontiguousarray(pp_coef, dtype=np.complex128)
    cdef Py_ssize_t n = zz.shape[0], i, j, k
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex x, acc, w, inner
    with nogil:
        for i in range(n):
            x = zz[i]
            acc = 0
            for j in range(P.shape[0] - 1, -1, -1):
                acc = acc * x + P[j]
            for j in range(LB.shape[0]):
                acc = acc + LL[j] * clog(x - LB[j])
            for k in range(PB.shape[0]):
                w = 1.0 / (x - PB[k])
                inner = 0
                for j in range(PTR[k + 1] - 1, PTR[k] - 1, -1):
                    inner = (inner + PC[j]) * w
                acc = acc + inner
            o[i] = acc + constant
    return out.reshape(shape)


cdef object _row_powers(double complex u, double complex w2, int nrows):
    """``q**r = exp(2iu*r*w2)`` for r = 1..nrows, computed as in the numpy twin."""
    return np.ascontiguousarray(np.exp(2j * u * w2) ** np.arange(1, nrows + 1), dtype=np.complex128)


def wp_sum(z, double complex u, double complex w2, int nrows, double complex shift):
    shape = np.shape(z)
    cdef const double complex[::1] zz = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    cdef const double complex[::1] Q = _row_powers(u, w2, nrows)
    cdef Py_ssize_t n = zz.shape[0], i
    cdef int r
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex s, acc, A, B, X, Y
    with nogil:
        for i in range(n):
            s = csin(u * zz[i])
            acc = 1.0 / (s * s)
            A = cexp(2j * u * zz[i])
            B = 1.0 / A
            for r in range(nrows):
                X = A * Q[r]
                Y = B * Q[r]
                acc = acc - 4.0 * X / ((X - 1.0) * (X - 1.0)) - 4.0 * Y / ((Y - 1.0) * (Y - 1.0))
            o[i] = u * u * acc + shift
    return out.reshape(shape)


def wp_prime_sum(z, double complex u, double complex w2, int nrows):
    shape = np.shape(z)
    cdef const double complex[::1] zz = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    cdef const double complex[::1] Q = _row_powers(u, w2, nrows)
    cdef Py_ssize_t n = zz.shape[0], i
    cdef int r
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex s, x, acc, A, B, X, Y, dX, dY
    with nogil:
        for i in range(n):
            x = u * zz[i]
            s = csin(x)
            acc = ccos(x) / (s * s * s)
            A = cexp(2j * x)
            B = 1.0 / A
            for r in range(nrows):
                X = A * Q[r]
                Y = B * Q[r]
                dX = X - 1.0
                dY = Y - 1.0
                acc = acc - 4j * X * (X + 1.0) / (dX * dX * dX) + 4j * Y * (Y + 1.0) / (dY * dY * dY)
            o[i] = -2.0 * u * u * u * acc
    return out.reshape(shape)


def wzeta_sum(z, double complex u, double complex w2, int nrows, double complex quad):
    shape = np.shape(z)
    cdef const double complex[::1] zz = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    cdef const double complex[::1] Q = _row_powers(u, w2, nrows)
    cdef Py_ssize_t n = zz.shape[0], i
    cdef int r
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex x, acc, A, B, X, Y
    with nogil:
        for i in range(n):
            x = u * zz[i]
            acc = ccos(x) / csin(x)
            A = cexp(2j * x)
            B = 1.0 / A
            for r in range(nrows):
                X = A * Q[r]
                Y = B * Q[r]
                acc = acc + 1j * (X + 1.0) / (X - 1.0) - 1j * (Y + 1.0) / (Y - 1.0)
            o[i] = u * acc + quad * zz[i]
    return out.reshape(shape)


def wsigma_prod(z, double complex u, row_sin2, double complex quad):
    shape = np.shape(z)
    cdef const double complex[::1] zz = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    cdef const double complex[::1] D = np.ascontiguousarray(row_sin2, dtype=np.complex128)
    cdef Py_ssize_t n = zz.shape[0], i, r
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex s, s2, prod
    with nogil:
        for i in range(n):
            s = csin(u * zz[i])
            prod = s / u * cexp(0.5 * quad * zz[i] * zz[i])
            s2 = s * s
            for r in range(D.shape[0]):
                prod = prod * (1.0 - s2 / D[r])
            o[i] = prod
    return out.reshape(shape)


def strip_bins(rho, int nbins):
    shape = np.shape(rho)
    cdef const double[::1] rr = np.ascontiguousarray(rho, dtype=np.float64).ravel()
    cdef Py_ssize_t n = rr.shape[0], i
    out = np.empty(n, dtype=np.int32)
    cdef int[::1] o = out
    cdef double width = TWO_PI / nbins, v
    cdef int idx
    with nogil:
        for i in range(n):
            v = rr[i]
            if not isfinite(v):
                o[i] = -1
                continue
            v = ceil((_wrap(v) + M_PI) / width) - 1.0
            if v != v:
                idx = 0
            elif v < 0:
                idx = 0
            elif v > nbins - 1:
                idx = nbins - 1
            else:
                idx = <int>v
            o[i] = idx
    return out.reshape(shape)


def level_mask(rho_plus, rho_minus, double rho0):
    shape = np.shape(rho_plus)
    cdef const double[::1] rp = np.ascontiguousarray(rho_plus, dtype=np.float64).ravel()
    cdef const double[::1] rm = np.ascontiguousarray(rho_minus, dtype=np.float64).ravel()
    cdef Py_ssize_t n = rp.shape[0], i
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] o = out
    cdef double a, b, half = 0.5 * M_PI
    with nogil:
        for i in range(n):
            a = _wrap(rp[i] - rho0)
            b = _wrap(rm[i] - rho0)
            if a * b < 0 and fabs(a) < half and fabs(b) < half:
                o[i] = 1
    return out.reshape(shape)

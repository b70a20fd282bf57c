# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gauss-Seidel coordinate sweep for linear-model losses."""
import numpy as np
from libc.math cimport exp, isfinite

cdef double LIPSCHITZ_FLOOR = 1e-12


cdef inline double _sigmoid_neg(double t) nogil:
    # 1 / (1 + exp(t)), evaluated without overflow
    cdef double e
    if t > 0:
        e = exp(-t)
        return e / (1.0 + e)
    return 1.0 / (1.0 + exp(t))


def coordinate_sweep(const double[:, ::1] cols, const double[::1] target, double[::1] x,
                     const long long[::1] order, double base_step, bint cap,
                     const double[::1] lam, const double[::1] lower, const double[::1] upper,
                     const unsigned char[::1] constrained, int loss):
    cdef Py_ssize_t p = cols.shape[0]
    cdef Py_ssize_t m = cols.shape[1]
    cdef Py_ssize_t q, j, l
    cdef double inv_m = 1.0 / m
    cdef double g, L, alpha, v, delta, acc, thr, xj, sub
    cdef double[::1] work = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t bad = -1

    with nogil:
        # residual A x - b (squared) or raw margin A x (logistic)
        for l in range(m):
            work[l] = 0.0
        for j in range(p):
            xj = x[j]
            if xj != 0.0:
                for l in range(m):
                    work[l] += cols[j, l] * xj
        if loss == 0:
            for l in range(m):
                work[l] -= target[l]

        for q in range(order.shape[0]):
            j = order[q]
            g = 0.0
            L = 0.0
            if loss == 0:
                for l in range(m):
                    g += cols[j, l] * work[l]
                    L += cols[j, l] * cols[j, l]
                g *= inv_m
                L *= inv_m
            else:
                for l in range(m):
                    g -= target[l] * cols[j, l] * _sigmoid_neg(target[l] * work[l])
                    L += cols[j, l] * cols[j, l]
                g *= inv_m
                L *= 0.25 * inv_m
            if L < LIPSCHITZ_FLOOR:
                L = LIPSCHITZ_FLOOR
            alpha = base_step
            if cap and 1.0 / L < alpha:
                alpha = 1.0 / L
            xj = x[j]
            if constrained[j]:
                sub = 0.0
                if xj > 0:
                    sub = lam[j]
                elif xj < 0:
                    sub = -lam[j]
                v = xj - alpha * (g + sub)
                if v < lower[j]:
                    v = lower[j]
                elif v > upper[j]:
                    v = upper[j]
            else:
                v = xj - alpha * g
                thr = alpha * lam[j]
                if thr > 0:
                    if v > thr:
                        v = v - thr
                    elif v < -thr:
                        v = v + thr
                    else:
                        v = 0.0
            if not isfinite(v) or not isfinite(g):
                bad = j
                break
            delta = v - xj
            x[j] = v
            if delta != 0.0:
                for l in range(m):
                    work[l] += delta * cols[j, l]
    return bad

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pure-Python kernels in ``_pure.py``.

Scalar closed-form proximal steps and row inner products: the innermost
operations of every engine loop. Arithmetic matches the pure implementation
operation for operation so either backend yields identical traces.
"""

from libc.math cimport fabs, copysign

KIND_ZERO = 0
KIND_ABS = 1
KIND_QUAD = 2
KIND_HINGE = 3

IS_COMPILED = True


cdef inline double _psi(int kind, double x, double p1, double p2) nogil:
    if kind == 0:
        return 0.0
    if kind == 1:
        return p1 * fabs(x)
    if kind == 2:
        return 0.5 * p1 * x * x + p2 * x
    return p1 * x if x > 0.0 else 0.0


cdef inline double _w(int kind, double d, double g, double x,
                      double gamma, double p1, double p2) nogil:
    return (-g * d - 0.5 * gamma * d * d
            + _psi(kind, x, p1, p2) - _psi(kind, x + d, p1, p2))


def psi_value(int kind, double x, double p1, double p2):
    if kind < 0 or kind > 3:
        raise ValueError(f"unknown separable-term kind code {kind}")
    return _psi(kind, x, p1, p2)


def w_value(int kind, double d, double g, double x,
            double gamma, double p1, double p2):
    if kind < 0 or kind > 3:
        raise ValueError(f"unknown separable-term kind code {kind}")
    return _w(kind, d, g, x, gamma, p1, p2)


def prox_step(int kind, double g, double x, double gamma,
              double p1, double p2):
    cdef double d, v, thr, u, s, best_d, best_w, cand_d, cand_w
    if kind == 0:
        d = -g / gamma
        return d, 0.5 * g * g / gamma
    if kind == 1:
        v = x - g / gamma
        thr = p1 / gamma
        u = copysign(fabs(v) - thr, v) if fabs(v) > thr else 0.0
        d = u - x
        best_w = _w(1, d, g, x, gamma, p1, p2)
        return d, (best_w if best_w > 0.0 else 0.0)
    if kind == 2:
        s = g + p2 + p1 * x
        d = -s / (gamma + p1)
        return d, 0.5 * s * s / (gamma + p1)
    if kind == 3:
        best_d = -x
        best_w = _w(3, best_d, g, x, gamma, p1, p2)
        cand_d = -(g + p1) / gamma
        if x + cand_d >= 0.0:
            cand_w = _w(3, cand_d, g, x, gamma, p1, p2)
            if cand_w > best_w:
                best_d = cand_d
                best_w = cand_w
        cand_d = -g / gamma
        if x + cand_d <= 0.0:
            cand_w = _w(3, cand_d, g, x, gamma, p1, p2)
            if cand_w > best_w:
                best_d = cand_d
                best_w = cand_w
        return best_d, (best_w if best_w > 0.0 else 0.0)
    raise ValueError(f"unknown separable-term kind code {kind}")


def row_dot(double[::1] values, long[::1] indices, double[::1] x):
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(values.shape[0]):
        s += values[i] * x[indices[i]]
    return s


def dense_row_dot(double[::1] row, double[::1] x):
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(row.shape[0]):
        s += row[i] * x[i]
    return s

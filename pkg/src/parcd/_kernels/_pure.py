"""Pure-Python reference kernels.

Same contract as the compiled extension in ``_core.pyx``; selected at import
by :mod:`parcd._kernels` when the extension is unavailable (or when
``PARCD_PURE_PYTHON=1``).

Separable-term kind codes shared by both implementations:
0 = zero, 1 = weighted absolute value, 2 = quadratic (a/2)x^2 + bx,
3 = weighted hinge w*max(0, x).
"""

from __future__ import annotations

import math

KIND_ZERO = 0
KIND_ABS = 1
KIND_QUAD = 2
KIND_HINGE = 3

IS_COMPILED = False


def psi_value(kind: int, x: float, p1: float, p2: float) -> float:
    if kind == KIND_ZERO:
        return 0.0
    if kind == KIND_ABS:
        return p1 * abs(x)
    if kind == KIND_QUAD:
        return 0.5 * p1 * x * x + p2 * x
    if kind == KIND_HINGE:
        return p1 * x if x > 0.0 else 0.0
    raise ValueError(f"unknown separable-term kind code {kind}")


def w_value(kind: int, d: float, g: float, x: float,
            gamma: float, p1: float, p2: float) -> float:
    return (-g * d - 0.5 * gamma * d * d
            + psi_value(kind, x, p1, p2) - psi_value(kind, x + d, p1, p2))


def prox_step(kind: int, g: float, x: float,
              gamma: float, p1: float, p2: float) -> tuple[float, float]:
    """Maximizer and maximum of d -> -g*d - (gamma/2)d^2 + psi(x) - psi(x+d)."""
    if kind == KIND_ZERO:
        d = -g / gamma
        return d, 0.5 * g * g / gamma
    if kind == KIND_ABS:
        # new point is the soft threshold of x - g/gamma at p1/gamma;
        # the max is nonnegative since d=0 gives W=0, so clamp the rounded
        # evaluation at the optimum
        v = x - g / gamma
        thr = p1 / gamma
        u = math.copysign(abs(v) - thr, v) if abs(v) > thr else 0.0
        d = u - x
        return d, max(w_value(kind, d, g, x, gamma, p1, p2), 0.0)
    if kind == KIND_QUAD:
        s = g + p2 + p1 * x
        d = -s / (gamma + p1)
        return d, 0.5 * s * s / (gamma + p1)
    if kind == KIND_HINGE:
        # candidates: smooth optimum on each side of the kink, and the kink
        best_d = -x
        best_w = w_value(kind, best_d, g, x, gamma, p1, p2)
        d_pos = -(g + p1) / gamma          # slope p1 branch, valid if x+d >= 0
        if x + d_pos >= 0.0:
            w = w_value(kind, d_pos, g, x, gamma, p1, p2)
            if w > best_w:
                best_d, best_w = d_pos, w
        d_neg = -g / gamma                 # slope 0 branch, valid if x+d <= 0
        if x + d_neg <= 0.0:
            w = w_value(kind, d_neg, g, x, gamma, p1, p2)
            if w > best_w:
                best_d, best_w = d_neg, w
        return best_d, max(best_w, 0.0)
    raise ValueError(f"unknown separable-term kind code {kind}")


def row_dot(values, indices, x) -> float:
    """Sparse row inner product sum_i values[i] * x[indices[i]]."""
    s = 0.0
    for v, j in zip(values, indices):
        s += v * x[j]
    return s


def dense_row_dot(row, x) -> float:
    s = 0.0
    for i in range(len(row)):
        s += row[i] * x[i]
    return s

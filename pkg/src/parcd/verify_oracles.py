"""Independent oracles used by the verification battery.

These deliberately avoid the closed forms they are checking: the prox
oracle maximizes the surrogate by golden-section search on its own
evaluation of W, and the gradient oracle uses central differences on the
objective value.
"""

from __future__ import annotations

import math

import numpy as np

from .prox import PsiSpec

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _psi_direct(psi: PsiSpec, x: float) -> float:
    if psi.kind == "zero":
        return 0.0
    if psi.kind == "abs":
        return psi.weight * abs(x)
    if psi.kind == "quadratic":
        return 0.5 * psi.curvature * x * x + psi.slope * x
    return psi.weight * max(0.0, x)


def _w_direct(d: float, g: float, x: float, gamma: float, psi: PsiSpec) -> float:
    return (-g * d - 0.5 * gamma * d * d
            + _psi_direct(psi, x) - _psi_direct(psi, x + d))


def prox_search_oracle(g: float, x: float, gamma: float, psi: PsiSpec,
                       iterations: int = 90) -> tuple[float, float]:
    """Golden-section maximization of the strictly concave surrogate.

    The bracket is wide enough to contain the maximizer for every supported
    psi kind; kink candidates are compared explicitly at the end.
    """
    reach = (abs(g) + psi.weight + abs(psi.slope)
             + psi.curvature * abs(x)) / gamma + abs(x) + 1.0
    lo, hi = -reach, reach
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc = _w_direct(c, g, x, gamma, psi)
    fd = _w_direct(d, g, x, gamma, psi)
    for _ in range(iterations):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = _w_direct(c, g, x, gamma, psi)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = _w_direct(d, g, x, gamma, psi)
    best_d = 0.5 * (lo + hi)
    best_w = _w_direct(best_d, g, x, gamma, psi)
    for cand in (-x, 0.0):   # kink of abs/hinge terms, and the no-move point
        w = _w_direct(cand, g, x, gamma, psi)
        if w > best_w:
            best_d, best_w = cand, w
    return best_d, best_w


def gradient_fd_error(problem, seed: int = 0, points: int = 100,
                      rel_step: float = 1e-6) -> float:
    """Max relative error of central-difference gradients of the smooth part."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        x = rng.normal(0.0, 2.0, problem.n)
        g = problem.smooth.grad_full(x)
        for k in range(problem.n):
            h = rel_step * (1.0 + abs(x[k]))
            hi = x.copy(); hi[k] += h
            lo = x.copy(); lo[k] -= h
            fd = (problem.smooth.value(hi) - problem.smooth.value(lo)) / (2 * h)
            worst = max(worst, abs(fd - g[k]) / max(1.0, abs(g[k])))
    return worst

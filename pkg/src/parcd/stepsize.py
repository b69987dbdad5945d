"""Step-size policies for the four engines and the meta contraction factor.

Each policy resolves the uniform surrogate curvature gamma required by the
corresponding convergence guarantee, plus the largest admissible
interference bound q for the asynchronous rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class StepSizePolicy:
    mode: str                      # 'explicit' | 'ccd' | 'pacd' | 'sacd'
    gamma: float
    q_max: int | None = None
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise InvalidParameterError("resolved gamma must be positive")


def explicit_policy(gamma: float) -> StepSizePolicy:
    return StepSizePolicy("explicit", float(gamma))


def gamma_ccd(l_full: float, n: int) -> float:
    """Cyclic rule: max{L, (4/sqrt 3) * L * ceil(log2 n)}.

    The floor at L covers n = 1, where the log term vanishes but the basic
    per-update progress bound still needs gamma >= L.
    """
    if not l_full > 0.0:
        raise InvalidParameterError("l_full must be positive")
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    return max(l_full, (4.0 / SQRT3) * l_full * math.ceil(math.log2(n)))


def gamma_pacd(l_full: float, l_max: float, kappa_max: int, r: int,
               q: int, n: int | None = None) -> StepSizePolicy:
    """Worst-case asynchronous rule.

    gamma = max of three lower bounds: (16/sqrt 3)*L*sqrt(kappa_max)*ceil(log2 r)
    for the stale-window gradient error, (8/sqrt 3)*q*L_max for the
    inconsistent-read gradient error, and 4*q*L_max for monotonicity of the
    amortized potential. q_max is the largest q' with q' <= gamma*sqrt(3)/(8 L_max).
    """
    if not (l_full > 0.0 and l_max > 0.0):
        raise InvalidParameterError("l_full and l_max must be positive")
    if kappa_max < 1 or r < 1 or q < 0:
        raise InvalidParameterError("kappa_max, r must be >= 1 and q >= 0")
    if n is not None and r < n:
        raise InvalidParameterError(f"round length r={r} must be >= n={n}")
    bounds = {
        "window": (16.0 / SQRT3) * l_full * math.sqrt(kappa_max) * math.ceil(math.log2(r)),
        "interference": (8.0 / SQRT3) * q * l_max,
        "potential": 4.0 * q * l_max,
    }
    gamma = max(bounds.values())
    q_max = math.floor(gamma * SQRT3 / (8.0 * l_max) + 1e-12)
    return StepSizePolicy("pacd", gamma, q_max=q_max, bounds=bounds)


def gamma_sacd(l_diag, l_res: float, n: int,
               gamma: float | None = None) -> StepSizePolicy:
    """Stochastic asynchronous rule.

    gamma defaults to max_j L_j; q_max is the largest integer q with
    q <= min{ gamma*sqrt(n-q) / (8*sqrt(10)*L_res), (9/100)*n }, found by a
    downward integer scan (the bound is self-referential in q).
    """
    l_diag = np.asarray(l_diag, dtype=float)
    if l_diag.size == 0:
        raise InvalidParameterError("l_diag must be nonempty")
    if not l_res > 0.0:
        raise InvalidParameterError("l_res must be positive")
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if gamma is None:
        gamma = float(l_diag.max())
    if not gamma > 0.0:
        raise InvalidParameterError("gamma must be positive")
    denom = 8.0 * math.sqrt(10.0) * l_res
    q = math.floor(9 * n / 100)
    while q > 0 and q > gamma * math.sqrt(n - q) / denom:
        q -= 1
    return StepSizePolicy("sacd", gamma, q_max=q)


def theoretical_rate(alpha: float, n: int, gamma: float, mu_F: float,
                     mu_f: float, beta: float | None = None,
                     q: int | None = None, r: int | None = None) -> float:
    """Per-update contraction factor of the strongly convex guarantee.

    Returns 1 - min{ (alpha/2n) * mu_F/(mu_F + gamma - mu_f), beta/(2q) };
    the second argument is omitted when beta is None (cyclic case, where the
    amortization term is identically zero).
    """
    if not mu_F > 0.0:
        raise InvalidParameterError("mu_F must be positive")
    if gamma < mu_f:
        raise InvalidParameterError("gamma must be >= mu_f")
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    terms = [(alpha / (2.0 * n)) * mu_F / (mu_F + gamma - mu_f)]
    if beta is not None:
        if q is None or q < 1:
            raise InvalidParameterError("beta requires q >= 1")
        terms.append(beta / (2.0 * q))
    return 1.0 - min(terms)

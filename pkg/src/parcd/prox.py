"""Per-coordinate proximal kernel and Lipschitz metadata.

The solver engines maximize, for one coordinate at a time, the surrogate

    W(d) = -g*d - (gamma/2)*d^2 + psi(x) - psi(x+d)

over the displacement d, where g is a (possibly stale) partial gradient of
the smooth part and psi is that coordinate's univariate convex term. The
maximizer and maximum are returned as a :class:`ProxStep`; closed forms
exist for all four supported psi kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidParameterError

_KIND_CODES = {
    "zero": _kernels.KIND_ZERO,
    "abs": _kernels.KIND_ABS,
    "quadratic": _kernels.KIND_QUAD,
    "hinge": _kernels.KIND_HINGE,
}


@dataclass(frozen=True)
class PsiSpec:
    """One univariate convex term.

    kind:       'zero' | 'abs' | 'quadratic' | 'hinge'
    weight:     multiplier for 'abs' (w*|x|) and 'hinge' (w*max(0,x)); >= 0
    curvature:  a >= 0 for 'quadratic', meaning (a/2)x^2 + bx
    slope:      b for 'quadratic'
    """

    kind: str = "zero"
    weight: float = 0.0
    curvature: float = 0.0
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise InvalidParameterError(f"unknown psi kind {self.kind!r}")
        if self.weight < 0.0:
            raise InvalidParameterError("psi weight must be nonnegative")
        if self.curvature < 0.0:
            raise InvalidParameterError("quadratic curvature must be nonnegative")

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def params(self) -> tuple[float, float]:
        if self.kind == "quadratic":
            return self.curvature, self.slope
        return self.weight, 0.0

    def value(self, x: float) -> float:
        p1, p2 = self.params
        return _kernels.psi_value(self.code, x, p1, p2)

    @staticmethod
    def zero() -> "PsiSpec":
        return PsiSpec("zero")

    @staticmethod
    def abs_weighted(weight: float) -> "PsiSpec":
        return PsiSpec("abs", weight=weight)

    @staticmethod
    def quadratic(curvature: float, slope: float = 0.0) -> "PsiSpec":
        return PsiSpec("quadratic", curvature=curvature, slope=slope)

    @staticmethod
    def hinge_weighted(weight: float) -> "PsiSpec":
        return PsiSpec("hinge", weight=weight)


@dataclass(frozen=True)
class ProxStep:
    """Argmax displacement and maximum surrogate value of one prox solve."""

    d_hat: float
    w_hat: float


def _check_gamma(gamma: float) -> None:
    if not gamma > 0.0:
        raise InvalidParameterError(f"step-size parameter must be positive, got {gamma}")


def w_value(d: float, g: float, x: float, gamma: float, psi: PsiSpec) -> float:
    """Evaluate the surrogate at displacement d."""
    _check_gamma(gamma)
    p1, p2 = psi.params
    return _kernels.w_value(psi.code, d, g, x, gamma, p1, p2)


def prox_step(g: float, x: float, gamma: float, psi: PsiSpec) -> ProxStep:
    """Maximize the surrogate over d; closed form per psi kind."""
    _check_gamma(gamma)
    p1, p2 = psi.params
    d, w = _kernels.prox_step(psi.code, g, x, gamma, p1, p2)
    return ProxStep(d, w)


@dataclass
class LipschitzInfo:
    """Gradient-sensitivity constants of the smooth part.

    l_full:  global smoothness constant L (spectral norm of the Hessian for
             quadratics)
    l_diag:  per-coordinate diagonal constants L_j
    l_max:   max over all pairwise constants L_jk
    l_res:   max row 2-norm of the L_jk matrix
    l_pair:  optional full |Hessian| matrix of L_jk values
    """

    l_full: float
    l_diag: np.ndarray
    l_max: float
    l_res: float
    l_pair: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.l_diag = np.asarray(self.l_diag, dtype=float)
        if self.l_full < 0 or self.l_max < 0 or self.l_res < 0 or (self.l_diag < 0).any():
            raise InvalidParameterError("Lipschitz constants must be nonnegative")

    @staticmethod
    def from_hessian(h: np.ndarray, l_full: float | None = None) -> "LipschitzInfo":
        """Exact constants for a quadratic smooth part with Hessian h."""
        h = np.asarray(h, dtype=float)
        pair = np.abs(h)
        if l_full is None:
            l_full = float(np.linalg.norm(h, 2))
        return LipschitzInfo(
            l_full=float(l_full),
            l_diag=np.abs(np.diag(h)).copy(),
            l_max=float(pair.max()),
            l_res=float(np.sqrt((pair ** 2).sum(axis=1).max())),
            l_pair=pair,
        )

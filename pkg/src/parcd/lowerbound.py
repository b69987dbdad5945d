"""Structured matrix family exhibiting the log-factor gap in cyclic descent.

The family lives in dimension 4n: M_n = D_n + A_n with D_n = 2*lambda_bar*I
and A_n the signed-circulant symmetric matrix whose first row is

    (0, a_1, 0, a_2, ..., 0, a_n, 0, -a_n, 0, ..., 0, -a_2, 0, -a_1),

a_i = 1/i, each subsequent row being the previous one rotated right by one
position with all signs flipped. With lambda_bar = 4.5 an upper bound on
|eigenvalues(A_n)|, M_n is positive definite with spectrum inside
[lambda_bar, 3*lambda_bar].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

LAMBDA_BAR = 4.5
TWO_PI_SQ = 2.0 * math.pi ** 2


def first_row(n: int) -> np.ndarray:
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    dim = 4 * n
    r = np.zeros(dim)
    a = 1.0 / np.arange(1, n + 1)
    r[1:2 * n:2] = a
    r[2 * n + 1::2] = -a[::-1]
    return r


def rotation_matrix(n: int) -> np.ndarray:
    """Materialize A_n: A[i, j] = (-1)^i * r[(j - i) mod 4n]."""
    r = first_row(n)
    dim = 4 * n
    i = np.arange(dim)[:, None]
    j = np.arange(dim)[None, :]
    return ((-1.0) ** i) * r[(j - i) % dim]


@dataclass
class LowerBoundFamily:
    n: int
    lambda_bar: float
    rotation: np.ndarray   # A_n
    hessian: np.ndarray    # M_n = 2*lambda_bar*I + A_n

    @property
    def dim(self) -> int:
        return 4 * self.n


def build_lower_bound_matrix(n: int, lambda_bar: float = LAMBDA_BAR) -> LowerBoundFamily:
    a = rotation_matrix(n)
    m = 2.0 * lambda_bar * np.eye(4 * n) + a
    return LowerBoundFamily(n=n, lambda_bar=lambda_bar, rotation=a, hessian=m)


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.value


def spectral_norm(m: np.ndarray, iterations: int = 5000, tol: float = 1e-12,
                  seed: int = 0) -> SpectralEstimate:
    """Power-iteration estimate of the largest absolute eigenvalue.

    Uses the norm-ratio iterate, which converges for symmetric matrices even
    when +lam and -lam are both extreme (as for the rotation family). Hitting
    the iteration cap without meeting tol returns a flagged estimate.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidParameterError("matrix must be square")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, iterations + 1):
        w = m @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return SpectralEstimate(0.0, True, it)
        new_est = nw
        v = w / nw
        if it > 1 and abs(new_est - est) <= tol * max(1.0, new_est):
            return SpectralEstimate(new_est, True, it)
        est = new_est
    return SpectralEstimate(est, False, iterations)


def min_eigenvalue(m: np.ndarray, iterations: int = 5000, tol: float = 1e-12,
                   seed: int = 0) -> float:
    """Smallest eigenvalue via power iteration on the shifted matrix."""
    top = spectral_norm(m, iterations=iterations, tol=tol, seed=seed)
    shifted = top.value * np.eye(m.shape[0]) - m
    gap = spectral_norm(shifted, iterations=iterations, tol=tol, seed=seed + 1)
    return top.value - gap.value


def b_row_first(n: int) -> np.ndarray:
    """First row of B_n = A_n^2 without materializing A_n.

    Row i of A_n is (-1)^i * roll(r, i), so (r @ A_n)[j] is the circular
    convolution of s = ((-1)^i * r_i) with r, computed by FFT.
    """
    r = first_row(n)
    s = r * ((-1.0) ** np.arange(4 * n))
    return np.real(np.fft.ifft(np.fft.fft(s) * np.fft.fft(r)))


def b_row_audit(n: int) -> tuple[float, float]:
    """Return (b_1, sum |b_i|) for the first row of A_n^2.

    Hard-fails if the proven bounds are violated: sum|b_i| <= 2*pi^2 and
    sum b_i = 0 (the rows of A_n each sum to zero).
    """
    row = b_row_first(n)
    b = row[0::2]   # nonzero entries sit at even positions
    b1 = float(b[0])
    total = float(b.sum())
    sum_abs = float(np.abs(b).sum())
    if sum_abs > TWO_PI_SQ + 1e-9:
        raise AssertionError(f"sum |b_i| = {sum_abs} exceeds 2*pi^2 at n={n}")
    if abs(total) > 1e-9:
        raise AssertionError(f"sum b_i = {total} not 0 at n={n}")
    return b1, sum_abs


def harmonic_gap_check(n: int) -> tuple[float, float, bool]:
    """Compare sum_{j<=2n} H_j^2 (harmonic numbers) against n*ln(n)^2."""
    if n < 2:
        raise InvalidParameterError("n must be >= 2")
    h = np.cumsum(1.0 / np.arange(1, 2 * n + 1))
    lhs = float((h ** 2).sum())
    rhs = float(n * math.log(n) ** 2)
    return lhs, rhs, lhs >= rhs

"""Problem generators with exact gradient oracles and Lipschitz metadata.

Every smooth part here is quadratic, f(x) = (1/2) x'Mx - b'x + c0, stored
either dense (M as an array) or as per-row sparse index/value pairs. Least
squares (1/2)||Ax - y||^2 is folded into this form with M = A'A, b = A'y,
c0 = (1/2) y'y, which keeps one gradient/Hessian code path for the solvers
and the replay diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidParameterError
from .lowerbound import build_lower_bound_matrix, min_eigenvalue, spectral_norm
from .prox import LipschitzInfo, PsiSpec

SYM_TOL = 1e-12


class QuadraticSmooth:
    """Dense quadratic smooth part."""

    def __init__(self, m: np.ndarray, b: np.ndarray, c0: float = 0.0):
        m = np.asarray(m, dtype=float)
        b = np.asarray(b, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != b.size:
            raise InvalidParameterError("hessian/linear-term shape mismatch")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > SYM_TOL * scale:
            raise InvalidParameterError("hessian must be symmetric")
        self.m = m
        self.b = b
        self.c0 = float(c0)
        self.n = b.size

    def value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.m @ x)) - float(self.b @ x) + self.c0

    def grad_full(self, x: np.ndarray) -> np.ndarray:
        return self.m @ x - self.b

    def grad_coord(self, k: int, x: np.ndarray) -> float:
        return float(np.dot(self.m[k], x)) - float(self.b[k])

    def hessian_row(self, k: int) -> np.ndarray:
        return self.m[k]

    def hessian_diag(self) -> np.ndarray:
        return np.diag(self.m).copy()

    def psd_floor(self) -> float:
        """Smallest eigenvalue estimate (shifted power iteration)."""
        return min_eigenvalue(self.m)


class SparseQuadraticSmooth:
    """Row-sparse quadratic smooth part for large instances."""

    def __init__(self, row_idx: list[np.ndarray], row_val: list[np.ndarray],
                 b: np.ndarray, c0: float = 0.0):
        self.row_idx = row_idx
        self.row_val = row_val
        self.b = np.asarray(b, dtype=float)
        self.c0 = float(c0)
        self.n = self.b.size
        if len(row_idx) != self.n or len(row_val) != self.n:
            raise InvalidParameterError("row storage/dimension mismatch")

    def value(self, x: np.ndarray) -> float:
        acc = 0.0
        for k in range(self.n):
            acc += x[k] * (self.row_val[k] @ x[self.row_idx[k]])
        return 0.5 * float(acc) - float(self.b @ x) + self.c0

    def grad_full(self, x: np.ndarray) -> np.ndarray:
        g = np.empty(self.n)
        for k in range(self.n):
            g[k] = self.row_val[k] @ x[self.row_idx[k]]
        return g - self.b

    def grad_coord(self, k: int, x: np.ndarray) -> float:
        return float(_kernels.row_dot(self.row_val[k], self.row_idx[k], x)) \
            - float(self.b[k])

    def hessian_row(self, k: int) -> np.ndarray:
        row = np.zeros(self.n)
        row[self.row_idx[k]] = self.row_val[k]
        return row

    def hessian_diag(self) -> np.ndarray:
        d = np.zeros(self.n)
        for k in range(self.n):
            hit = np.nonzero(self.row_idx[k] == k)[0]
            if hit.size:
                d[k] = self.row_val[k][hit[0]]
        return d


@dataclass
class CompositeProblem:
    """Smooth quadratic part plus one univariate convex term per coordinate."""

    smooth: QuadraticSmooth | SparseQuadraticSmooth
    psis: list[PsiSpec]
    lipschitz: LipschitzInfo
    x_star: np.ndarray | None = None
    f_star: float | None = None
    mu_f: float | None = None     # strong convexity of the smooth part
    mu_F: float | None = None     # strong convexity of the full objective
    recipe: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.psis) != self.smooth.n:
            raise InvalidParameterError("need one psi per coordinate")

    @property
    def n(self) -> int:
        return self.smooth.n

    def psi_sum(self, x: np.ndarray) -> float:
        return sum(psi.value(float(x[k])) for k, psi in enumerate(self.psis))

    def objective(self, x: np.ndarray) -> float:
        return self.smooth.value(x) + self.psi_sum(x)

    def gap(self, x: np.ndarray) -> float:
        if self.f_star is None:
            raise InvalidParameterError("problem has no recorded minimum")
        return self.objective(x) - self.f_star

    def grad_coord(self, k: int, x: np.ndarray) -> float:
        return self.smooth.grad_coord(k, x)


def _seeded_least_squares(n: int, seed: int, m_rows: int | None):
    """Seeded design matrix with unit-norm columns (so L_j = 1 exactly)."""
    rng = np.random.default_rng(seed)
    m_rows = 2 * n if m_rows is None else m_rows
    a = rng.standard_normal((m_rows, n))
    a /= np.linalg.norm(a, axis=0)
    y = rng.standard_normal(m_rows)
    return a, y


def _ls_metadata(a: np.ndarray, y: np.ndarray):
    gram = a.T @ a
    gram = 0.5 * (gram + gram.T)
    b = a.T @ y
    c0 = 0.5 * float(y @ y)
    eigs = np.linalg.eigvalsh(gram)
    return gram, b, c0, float(eigs[0]), float(eigs[-1])


def from_least_squares(a: np.ndarray, y: np.ndarray, psis: list[PsiSpec],
                       recipe: dict | None = None) -> CompositeProblem:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    y = np.asarray(y, dtype=float)
    gram, b, c0, lo, hi = _ls_metadata(a, y)
    smooth = QuadraticSmooth(gram, b, c0)
    info = LipschitzInfo.from_hessian(gram, l_full=hi)
    return CompositeProblem(smooth, psis, info, mu_f=max(lo, 0.0),
                            recipe=recipe or {})


def make_ridge(n: int, seed: int, curvature: float,
               m_rows: int | None = None) -> CompositeProblem:
    """Least squares plus (curvature/2) x_k^2 per coordinate; closed-form
    minimizer recorded for use as a convergence oracle."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if curvature < 0:
        raise InvalidParameterError("curvature must be nonnegative")
    a, y = _seeded_least_squares(n, seed, m_rows)
    psis = [PsiSpec.quadratic(curvature) for _ in range(n)]
    prob = from_least_squares(a, y, psis,
                              recipe={"kind": "ridge", "n": n, "seed": seed,
                                      "curvature": curvature,
                                      "m_rows": a.shape[0]})
    gram, b = prob.smooth.m, prob.smooth.b
    x_star = np.linalg.solve(gram + curvature * np.eye(n), b)
    prob.x_star = x_star
    prob.f_star = prob.objective(x_star)
    prob.mu_F = (prob.mu_f or 0.0) + curvature
    return prob


def make_lasso(n: int, seed: int, reg_weight: float,
               m_rows: int | None = None) -> CompositeProblem:
    """Least squares plus reg_weight * |x_k| per coordinate."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if reg_weight < 0:
        raise InvalidParameterError("reg_weight must be nonnegative")
    a, y = _seeded_least_squares(n, seed, m_rows)
    psis = [PsiSpec.abs_weighted(reg_weight) for _ in range(n)]
    prob = from_least_squares(a, y, psis,
                              recipe={"kind": "lasso", "n": n, "seed": seed,
                                      "reg_weight": reg_weight,
                                      "m_rows": a.shape[0]})
    if n == 1:
        # soft threshold of the unregularized solution (unit-norm column)
        t = float(prob.smooth.b[0])
        x1 = np.sign(t) * max(abs(t) - reg_weight, 0.0)
        prob.x_star = np.array([x1])
        prob.f_star = prob.objective(prob.x_star)
    return prob


def make_sparse_quadratic(n: int, seed: int, degree: int = 4,
                          coupling: float = 0.05,
                          b_scale: float = 0.1) -> CompositeProblem:
    """Diagonally dominant sparse quadratic with bounded row degree.

    Diagonal is 1, so L_j = 1; off-diagonal couplings are symmetric pairs
    drawn uniformly from [-coupling, coupling].
    """
    if n < 2:
        raise InvalidParameterError("n must be >= 2")
    rng = np.random.default_rng(seed)
    rows_i: list[list[int]] = [[k] for k in range(n)]
    rows_v: list[list[float]] = [[1.0] for _ in range(n)]
    for _ in range(n * degree // 2):
        a = int(rng.integers(0, n))
        c = int(rng.integers(0, n))
        if a == c or c in rows_i[a]:
            continue
        v = float(rng.uniform(-coupling, coupling))
        rows_i[a].append(c)
        rows_v[a].append(v)
        rows_i[c].append(a)
        rows_v[c].append(v)
    row_idx = [np.array(r, dtype=np.int64) for r in rows_i]
    row_val = [np.array(r, dtype=float) for r in rows_v]
    b = rng.standard_normal(n) * b_scale
    smooth = SparseQuadraticSmooth(row_idx, row_val, b)
    psis = [PsiSpec.zero() for _ in range(n)]
    l_res = max(float(np.sqrt((v ** 2).sum())) for v in row_val)
    l_max = max(float(np.abs(v).max()) for v in row_val)
    row_degree = max(v.size for v in row_val)
    # Gershgorin bound on the spectral norm; exact value is not needed
    l_full = 1.0 + max(float(np.abs(v).sum()) - 1.0 for v in row_val)
    info = LipschitzInfo(l_full=l_full, l_diag=np.ones(n), l_max=l_max,
                         l_res=l_res)
    max_offdiag = max((float(np.abs(v[1:]).max()) if v.size > 1 else 0.0)
                      for v in row_val)
    return CompositeProblem(
        smooth, psis, info,
        mu_f=max(0.0, 1.0 - (l_full - 1.0)),
        recipe={"kind": "sparse", "n": n, "seed": seed, "degree": degree,
                "coupling": coupling, "b_scale": b_scale,
                "row_degree": row_degree, "max_offdiag": max_offdiag})


def make_lower_bound_problem(n: int) -> CompositeProblem:
    """Quadratic problem on the 4n-dimensional structured Hessian family."""
    fam = build_lower_bound_matrix(n)
    smooth = QuadraticSmooth(fam.hessian, np.zeros(fam.dim))
    psis = [PsiSpec.zero() for _ in range(fam.dim)]
    info = LipschitzInfo.from_hessian(
        fam.hessian, l_full=spectral_norm(fam.hessian).value)
    prob = CompositeProblem(smooth, psis, info, x_star=np.zeros(fam.dim),
                            f_star=0.0,
                            recipe={"kind": "lowerbound", "n": n})
    prob.mu_f = max(0.0, 2 * fam.lambda_bar - info.l_full)
    prob.mu_F = prob.mu_f
    return prob

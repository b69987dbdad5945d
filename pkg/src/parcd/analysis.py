"""Post-hoc verification of solver traces.

Everything here works off the commit-ordered trace: the objective is
replayed update by update, the accurate partial gradient at each pre-update
state is recomputed, and the amortized quantities (the carry term A and the
potential H = F + A), the cyclic window quantity Q, and the per-update
progress inequalities are evaluated on the replayed series.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .engine import SCHEDULE_CYCLIC, Trace
from .errors import CorruptTraceError, InvalidParameterError, UnsupportedScheduleError
from .problems import CompositeProblem
from .prox import PsiSpec, prox_step, w_value
from .tolerances import LEMMA_REL_SLACK, REPLAY_F_REL, REPLAY_STATE_ATOL


@dataclass
class ReplaySeries:
    """Per-commit series recovered by replaying a trace.

    f has length T+1 (f[0] is the objective at the start vector); the other
    columns have length T, indexed by commit time minus one.
    """

    problem: CompositeProblem
    trace: Trace
    f: np.ndarray
    g_acc: np.ndarray          # accurate partial gradient at pre-update state
    grad_err_sq: np.ndarray    # (g_acc - g_tilde)^2
    w_hat: np.ndarray          # surrogate optimum at the accurate gradient
    dx_sq: np.ndarray

    def __len__(self) -> int:
        return len(self.trace)


def replay_objective(problem: CompositeProblem, trace: Trace,
                     check_fidelity: bool = True,
                     f_checkpoints: int = 10,
                     checkpoint_seed: int = 0) -> ReplaySeries:
    """Apply the trace's displacements in commit order from x0.

    Verifies that every displacement equals the closed-form prox step for
    the recorded stale gradient at the replayed pre-update value, that the
    incrementally maintained objective matches direct evaluation at random
    checkpoints, and that the final state matches the one the run stored.
    """
    t_total = len(trace)
    x = trace.x0.copy()
    diag = problem.smooth.hessian_diag()
    gamma = trace.gamma
    psis = problem.psis

    f = np.empty(t_total + 1)
    g_acc = np.empty(t_total)
    w_hat = np.empty(t_total)
    f[0] = problem.objective(x)

    rng = random.Random(checkpoint_seed)
    checks = set(rng.sample(range(1, t_total + 1),
                            min(f_checkpoints, t_total))) if t_total else set()

    for i in range(t_total):
        k = int(trace.k[i])
        dx = float(trace.dx[i])
        gt = float(trace.g_tilde[i])
        xk = float(x[k])
        if check_fidelity:
            step = prox_step(gt, xk, gamma, psis[k])
            if step.d_hat != dx:
                raise CorruptTraceError(
                    f"update {i + 1}: recorded displacement {dx!r} does not "
                    f"equal the prox step {step.d_hat!r}")
        g = problem.grad_coord(k, x)
        g_acc[i] = g
        w_hat[i] = prox_step(g, xk, gamma, psis[k]).w_hat
        psi_before = psis[k].value(xk)
        x[k] = xk + dx
        f[i + 1] = (f[i] + dx * g + 0.5 * diag[k] * dx * dx
                    + psis[k].value(float(x[k])) - psi_before)
        if (i + 1) in checks:
            direct = problem.objective(x)
            if not math.isclose(f[i + 1], direct,
                                rel_tol=REPLAY_F_REL,
                                abs_tol=REPLAY_F_REL * max(1.0, abs(f[0]))):
                raise CorruptTraceError(
                    f"objective drift at update {i + 1}: incremental "
                    f"{f[i + 1]!r} vs direct {direct!r}")

    if trace.workers == 1:
        if not np.array_equal(x, trace.x_final):
            raise CorruptTraceError("serialized replay does not reproduce the "
                                    "final state bit-for-bit")
    elif np.abs(x - trace.x_final).max() > REPLAY_STATE_ATOL:
        raise CorruptTraceError("parallel replay drifted from the final state")

    grad_err_sq = (g_acc - trace.g_tilde) ** 2
    return ReplaySeries(problem=problem, trace=trace, f=f, g_acc=g_acc,
                        grad_err_sq=grad_err_sq, w_hat=w_hat,
                        dx_sq=trace.dx ** 2)


@dataclass
class AmortizedSeries:
    """Carry term and amortized potential along a replayed trace."""

    a: np.ndarray    # length T+1, a[0] = 0
    h: np.ndarray    # h = f + a
    gamma: float
    q: int

    def max_rise(self) -> float:
        return float(np.diff(self.h).max()) if self.h.size > 1 else 0.0

    def nonincreasing(self, slack: float) -> bool:
        return self.max_rise() <= slack


def amortized_H_series(replay: ReplaySeries, gamma: float, q: int) -> AmortizedSeries:
    """A(t) = (1/16) sum_{tau=max(t-q,1)}^{t} ((tau+q)-t)/q * gamma * dx_tau^2.

    For q = 0 the carry term is identically zero and H reduces to F.
    """
    if q < 0:
        raise InvalidParameterError("q must be >= 0")
    t_total = len(replay)
    a = np.zeros(t_total + 1)
    if q > 0 and t_total > 0:
        scaled = gamma * replay.dx_sq / 16.0
        for t in range(1, t_total + 1):
            lo = max(t - q, 1)
            taus = np.arange(lo, t + 1)
            weights = (taus + q - t) / q
            a[t] = float(weights @ scaled[lo - 1:t])
    return AmortizedSeries(a=a, h=replay.f + a, gamma=gamma, q=q)


def window_quantity(problem: CompositeProblem, ks, dxs, t: int, n: int,
                    gamma: float) -> float:
    """The cyclic window quantity

        Q = (gamma/4) * sum_{i=t-2n+1}^{t} dx_i^2
            - 2/(3*gamma*n) * sum_i sum_{j=max(t-2n+1, i-n+1)}^{i}
              (g_{k_i}^j - g_{k_i}^i)^2

    with historical gradient differences recovered from the Hessian:
    g_k^i - g_k^j = sum_{tau=j}^{i-1} H[k, k_tau] * dx_tau.
    """
    if t < 2 * n:
        raise InvalidParameterError("window end must be at least 2n")
    if t > len(ks):
        raise InvalidParameterError("window end beyond trace length")
    lo = t - 2 * n + 1
    first = (gamma / 4.0) * sum(dxs[i - 1] ** 2 for i in range(lo, t + 1))
    rows = {}
    total = 0.0
    for i in range(lo, t + 1):
        ki = int(ks[i - 1])
        if ki not in rows:
            rows[ki] = problem.smooth.hessian_row(ki)
        row = rows[ki]
        s = 0.0
        jmin = max(lo, i - n + 1)
        for j in range(i - 1, jmin - 1, -1):
            s += row[int(ks[j - 1])] * dxs[j - 1]
            total += s * s
    return first - (2.0 / (3.0 * gamma * n)) * total


def ccd_Q_diagnostic(replay: ReplaySeries, t: int, n: int,
                     gamma: float | None = None) -> float:
    """Window quantity on a cyclic trace; the step-size rule guarantees
    Q >= 0, and Q < 0 flags a step size below the rule."""
    if replay.trace.schedule != SCHEDULE_CYCLIC:
        raise UnsupportedScheduleError(
            f"window diagnostic needs a cyclic trace, got {replay.trace.schedule!r}")
    if gamma is None:
        gamma = replay.trace.gamma
    return window_quantity(replay.problem, replay.trace.k, replay.trace.dx,
                           t, n, gamma)


@dataclass
class CheckLine:
    name: str
    lhs: float
    rhs: float
    margin: float
    ok: bool
    detail: dict = field(default_factory=dict)

    def format(self) -> str:
        status = "pass" if self.ok else "FAIL"
        return (f"{self.name}\tlhs={self.lhs!r}\trhs={self.rhs!r}"
                f"\tmargin={self.margin!r}\t{status}")


@dataclass
class SuiteReport:
    checks: list[CheckLine] = field(default_factory=list)

    @property
    def violations(self) -> list[CheckLine]:
        return [c for c in self.checks if not c.ok]

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, name: str, lhs: float, rhs: float, slack: float,
            detail: dict | None = None) -> None:
        """Record the inequality lhs >= rhs, with relative slack."""
        margin = lhs - rhs
        tol = slack * max(1.0, abs(lhs), abs(rhs))
        self.checks.append(CheckLine(name, lhs, rhs, margin,
                                     margin >= -tol, detail or {}))

    def format(self) -> str:
        return "\n".join(c.format() for c in self.checks)


def _random_psi(rng: random.Random) -> PsiSpec:
    kind = rng.choice(["zero", "abs", "quadratic", "hinge"])
    if kind == "abs":
        return PsiSpec.abs_weighted(abs(rng.gauss(0, 2)))
    if kind == "quadratic":
        return PsiSpec.quadratic(abs(rng.gauss(0, 2)), rng.gauss(0, 2))
    if kind == "hinge":
        return PsiSpec.hinge_weighted(abs(rng.gauss(0, 2)))
    return PsiSpec.zero()


def lemma_suite(seed: int, samples: int,
                rel_slack: float = LEMMA_REL_SLACK) -> SuiteReport:
    """Randomized check of the surrogate inequalities the analysis rests on.

    Per sampled tuple (g, g', x, gamma, psi, s): the shift bound relating
    surrogate optima at two gradients, the quadratic lower bound on the
    optimum, nonexpansiveness of the step in the gradient, the secant lower
    bound W(s*d) >= s*W(d), the three-point property of the prox objective,
    and monotonicity of the optimum in gamma.
    """
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    rng = random.Random(seed)
    report = SuiteReport()
    for it in range(samples):
        g = rng.gauss(0, 3)
        g2 = rng.gauss(0, 3)
        x = rng.gauss(0, 3)
        gamma = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
        psi = _random_psi(rng)
        s = rng.random()
        tup = {"i": it, "g": g, "g2": g2, "x": x, "gamma": gamma,
               "psi": psi.kind, "s": s}

        step = prox_step(g, x, gamma, psi)
        step2 = prox_step(g2, x, gamma, psi)

        report.add("shift-bound", step.w_hat,
                   (2.0 / 3.0) * step2.w_hat - (4.0 / (3.0 * gamma)) * (g - g2) ** 2,
                   rel_slack, tup)
        report.add("quadratic-floor", step.w_hat,
                   0.5 * gamma * step.d_hat ** 2, rel_slack, tup)
        report.add("nonexpansive", abs(g - g2) / gamma,
                   abs(step.d_hat - step2.d_hat), rel_slack, tup)
        report.add("secant", w_value(s * step.d_hat, g, x, gamma, psi),
                   s * step.w_hat, rel_slack, tup)
        # three-point property of d -> Y(d) + (gamma/2) d^2 at its minimizer
        # d_hat, instantiated at the random point d' = step2.d_hat
        dprime = step2.d_hat
        y_dprime = g * dprime - psi.value(x) + psi.value(x + dprime)
        y_dhat = g * step.d_hat - psi.value(x) + psi.value(x + step.d_hat)
        report.add("three-point",
                   y_dprime + 0.5 * gamma * dprime ** 2,
                   y_dhat + 0.5 * gamma * (dprime - step.d_hat) ** 2
                   + 0.5 * gamma * step.d_hat ** 2,
                   rel_slack, tup)
        gamma_hi = gamma * (1.0 + rng.random() * 4.0)
        report.add("gamma-monotone", step.w_hat,
                   prox_step(g, x, gamma_hi, psi).w_hat, rel_slack, tup)
    return report


@dataclass
class RateWindow:
    t_end: int
    empirical: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.empirical <= self.bound


@dataclass
class RateReport:
    factor: float
    windows: list[RateWindow] = field(default_factory=list)
    skipped: int = 0

    @property
    def ok(self) -> bool:
        return all(w.ok for w in self.windows)


def rate_audit(replay: ReplaySeries, gamma: float, alpha: float,
               mu_F: float, mu_f: float, r: int,
               beta: float | None = None, q: int | None = None,
               f_star: float | None = None) -> RateReport:
    """Compare per-update contraction of the potential gap against the
    guaranteed factor over consecutive windows of 2r commits.

    Observed progress may only beat the bound; a converged window (gap
    numerically zero) passes vacuously.
    """
    from .stepsize import theoretical_rate

    if f_star is None:
        f_star = replay.problem.f_star
    if f_star is None:
        raise InvalidParameterError("rate audit needs the problem's minimum value")
    factor = theoretical_rate(alpha, replay.problem.n, gamma, mu_F, mu_f,
                              beta=beta, q=q)
    if q and beta is not None:
        h = amortized_H_series(replay, gamma, q).h - f_star
    else:
        h = replay.f - f_star
    report = RateReport(factor=factor)
    t = 2 * r
    tiny = 1e-13 * max(1.0, abs(h[0]))
    while t < h.size:
        prev = h[t - 2 * r]
        cur = h[t]
        if prev <= tiny or cur <= tiny:
            report.skipped += 1
        else:
            emp = (cur / prev) ** (1.0 / (2 * r))
            report.windows.append(RateWindow(t_end=t, empirical=emp, bound=factor))
        t += 2 * r
    return report

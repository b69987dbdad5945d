"""Proximal coordinate descent engines and asynchronous tatonnement.

Composite objectives F(x) = f(x) + sum_k psi_k(x_k) are minimized by four
engines (cyclic, sequential stochastic, partitioned asynchronous, stochastic
asynchronous) over a shared coordinate store with per-cell atomic access.
Every run produces a commit-ordered trace that can be replayed to verify
the update rule, per-update progress, interference bounds and monotonicity
of the amortized potential. A discrete-event simulator applies the same
machinery to asynchronous tatonnement price dynamics in Fisher markets.
"""

from ._kernels import IS_COMPILED
from .engine import (AsyncConfig, Trace, UpdateRecord, ccd_solve,
                     measure_interference, pacd_run, sacd_run, scd_solve)
from .market import (Buyer, FisherMarket, TatonnementConfig,
                     async_tatonnement_run, demand, equilibrium_residual,
                     excess_demand, phi, step_size_audit,
                     sync_tatonnement_step)
from .problems import (CompositeProblem, from_least_squares, make_lasso,
                       make_lower_bound_problem, make_ridge,
                       make_sparse_quadratic)
from .prox import LipschitzInfo, ProxStep, PsiSpec, prox_step, w_value
from .stepsize import (StepSizePolicy, gamma_ccd, gamma_pacd, gamma_sacd,
                       theoretical_rate)

__version__ = "0.1.0"

__all__ = [
    "AsyncConfig", "Buyer", "CompositeProblem", "FisherMarket",
    "IS_COMPILED", "LipschitzInfo", "ProxStep", "PsiSpec", "StepSizePolicy",
    "TatonnementConfig", "Trace", "UpdateRecord", "async_tatonnement_run",
    "ccd_solve", "demand", "equilibrium_residual", "excess_demand",
    "from_least_squares", "gamma_ccd", "gamma_pacd", "gamma_sacd",
    "make_lasso", "make_lower_bound_problem", "make_ridge",
    "make_sparse_quadratic", "measure_interference", "pacd_run", "phi",
    "prox_step", "sacd_run", "scd_solve", "step_size_audit",
    "sync_tatonnement_step", "theoretical_rate", "w_value",
]

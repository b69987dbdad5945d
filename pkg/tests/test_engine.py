import numpy as np
import pytest

from parcd.engine import (AsyncConfig, EngineAbort, SCHEDULE_PARTITIONED,
                          SCHEDULE_UNIFORM, Trace, UpdateRecord, ccd_solve,
                          measure_interference, pacd_run, sacd_run, scd_solve)
from parcd.errors import InvalidParameterError
from parcd.problems import CompositeProblem, QuadraticSmooth, from_least_squares
from parcd.prox import LipschitzInfo, PsiSpec
from parcd.stepsize import gamma_ccd, gamma_pacd


def one_dim_quadratic():
    smooth = QuadraticSmooth(np.array([[1.0]]), np.zeros(1))
    return CompositeProblem(smooth, [PsiSpec.zero()],
                            LipschitzInfo.from_hessian(np.array([[1.0]])),
                            x_star=np.zeros(1), f_star=0.0)


def ridge_1d():
    return from_least_squares(np.array([[1.0]]), np.array([1.0]),
                              [PsiSpec.quadratic(1.0)])


def test_ccd_single_update_lands_on_minimizer():
    prob = one_dim_quadratic()
    trace = ccd_solve(prob, 1.0, 1, x0=np.array([1.0]))
    assert len(trace) == 1
    assert trace.x_final[0] == 0.0
    assert trace.dx[0] == -1.0


def test_ccd_converges_to_ridge_minimizer():
    trace = ccd_solve(ridge_1d(), 2.0, 50)
    assert abs(trace.x_final[0] - 0.5) <= 1e-8


def test_ccd_rejects_zero_epochs():
    with pytest.raises(InvalidParameterError):
        ccd_solve(one_dim_quadratic(), 1.0, 0)


def test_ccd_rejects_gamma_below_diag_floor(ridge16):
    with pytest.raises(InvalidParameterError):
        ccd_solve(ridge16, 0.5, 1)


def test_ccd_aborts_on_nonfinite_gradient():
    smooth = QuadraticSmooth(np.array([[1.0]]), np.array([np.nan]))
    prob = CompositeProblem(smooth, [PsiSpec.zero()],
                            LipschitzInfo.from_hessian(np.array([[1.0]])))
    with pytest.raises(EngineAbort):
        ccd_solve(prob, 1.0, 1)


def test_scd_deterministic_in_seed(ridge16):
    a = scd_solve(ridge16, 2.0, 300, seed=11)
    b = scd_solve(ridge16, 2.0, 300, seed=11)
    assert np.array_equal(a.k, b.k)
    assert np.array_equal(a.dx, b.dx)
    assert np.array_equal(a.x_final, b.x_final)


def test_scd_single_coordinate_degenerates_to_ccd():
    prob = ridge_1d()
    a = scd_solve(prob, 2.0, 20, seed=0)
    b = ccd_solve(prob, 2.0, 20)
    assert np.array_equal(a.dx, b.dx)


def test_objective_nonincreasing_on_accurate_runs(ridge16):
    gamma = gamma_ccd(ridge16.lipschitz.l_full, 16)
    for trace in (ccd_solve(ridge16, gamma, 5),
                  scd_solve(ridge16, gamma, 200, seed=1)):
        x = trace.x0.copy()
        prev = ridge16.objective(x)
        for t in range(len(trace)):
            x[trace.k[t]] += trace.dx[t]
            cur = ridge16.objective(x)
            assert cur <= prev + 1e-9 * max(1.0, prev)
            prev = cur


def test_pacd_single_worker_equals_ccd(ridge16):
    gamma = gamma_ccd(ridge16.lipschitz.l_full, 16)
    cfg = AsyncConfig(workers=1, q=0, r=32, kappa_max=2,
                      schedule=SCHEDULE_PARTITIONED, pseudo_rounds=4)
    par = pacd_run(ridge16, gamma, cfg)
    ser = ccd_solve(ridge16, gamma, 4)
    assert np.array_equal(par.k, ser.k)
    assert np.array_equal(par.dx, ser.dx)
    assert np.array_equal(par.g_tilde, ser.g_tilde)
    assert np.array_equal(par.snapshot, ser.snapshot)
    assert np.array_equal(par.ns, ser.ns)          # serialized mode: all zero
    assert np.array_equal(par.x_final, ser.x_final)


def test_pacd_four_workers_audits_and_converges(ridge64):
    cfg = AsyncConfig(workers=4, q=8, r=128, kappa_max=2,
                      schedule=SCHEDULE_PARTITIONED, pseudo_rounds=60, seed=0)
    gamma = gamma_pacd(ridge64.lipschitz.l_full, ridge64.lipschitz.l_max,
                       2, 128, 8, n=64).gamma
    trace = pacd_run(ridge64, gamma, cfg)
    assert trace.error is None
    assert len(trace) == 60 * 64
    q_obs, audit = measure_interference(trace)
    assert q_obs <= 8
    assert audit.blocks_ok          # aligned blocks: counts within [1, kappa]
    assert audit.sliding_min_ok     # every sliding window sees every coord
    x = trace.x0.copy()
    for t in range(len(trace)):
        x[trace.k[t]] += trace.dx[t]
    assert np.array_equal(x, trace.x_final)


def test_sacd_single_worker_matches_scd_bitwise(ridge64):
    ser = scd_solve(ridge64, 10.0, 500, seed=7)
    cfg = AsyncConfig(workers=1, q=0, schedule=SCHEDULE_UNIFORM, t_bar=500,
                      seed=7)
    par = sacd_run(ridge64, 10.0, cfg)
    for col in ("k", "dx", "g_tilde", "snapshot", "ns"):
        assert np.array_equal(getattr(ser, col), getattr(par, col))
    assert np.array_equal(ser.x_final, par.x_final)


def test_sacd_commits_exactly_t_bar(ridge64):
    cfg = AsyncConfig(workers=4, q=12, schedule=SCHEDULE_UNIFORM, t_bar=2000,
                      seed=5)
    trace = sacd_run(ridge64, 10.0, cfg)
    assert trace.error is None
    assert len(trace) == 2000
    q_obs, _ = measure_interference(trace)
    assert q_obs <= 12


def test_interference_zero_when_serialized(ridge16):
    trace = ccd_solve(ridge16, 10.0, 2)
    q_obs, _ = measure_interference(trace)
    assert q_obs == 0


def test_interference_of_interleaved_fixture():
    # two updates whose read phases both began before the first commit
    prob = one_dim_quadratic()
    recs = [UpdateRecord(t=1, k=0, dx=0.1, g_tilde=0.0, gamma=1.0,
                         snapshot=0, ns=0),
            UpdateRecord(t=2, k=0, dx=0.1, g_tilde=0.0, gamma=1.0,
                         snapshot=0, ns=0)]
    trace = Trace.from_records(recs, gamma=1.0, schedule=SCHEDULE_UNIFORM,
                               x0=np.zeros(1), problem=prob)
    q_obs, _ = measure_interference(trace)
    assert q_obs == 1


def test_config_validation(ridge16):
    with pytest.raises(InvalidParameterError):
        AsyncConfig(workers=4, q=8, r=8, schedule=SCHEDULE_PARTITIONED,
                    pseudo_rounds=1).validate(16)
    with pytest.raises(InvalidParameterError):
        AsyncConfig(workers=0).validate(16)
    with pytest.raises(InvalidParameterError):
        sacd_run(ridge16, 10.0, AsyncConfig(workers=1, schedule="bogus", t_bar=5))


def test_worker_failure_returns_partial_trace_with_error_mark():
    m = np.eye(4)
    b = np.array([0.1, np.nan, 0.1, 0.1])
    smooth = QuadraticSmooth(m, b)
    prob = CompositeProblem(smooth, [PsiSpec.zero()] * 4,
                            LipschitzInfo.from_hessian(m))
    cfg = AsyncConfig(workers=2, q=4, schedule=SCHEDULE_UNIFORM, t_bar=100,
                      seed=0)
    trace = sacd_run(prob, 2.0, cfg)
    assert trace.error is not None
    assert "non-finite" in trace.error
    assert len(trace) < 100


def test_trace_replays_bitwise_after_parallel_run(ridge64):
    cfg = AsyncConfig(workers=3, q=6, r=128, kappa_max=2,
                      schedule=SCHEDULE_PARTITIONED, pseudo_rounds=10, seed=2)
    gamma = gamma_pacd(ridge64.lipschitz.l_full, ridge64.lipschitz.l_max,
                       2, 128, 6, n=64).gamma
    trace = pacd_run(ridge64, gamma, cfg)
    x = trace.x0.copy()
    for t in range(len(trace)):
        x[trace.k[t]] += trace.dx[t]
    assert np.array_equal(x, trace.x_final)

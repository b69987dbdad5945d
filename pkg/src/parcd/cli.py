"""Command-line harness.

Subcommands:
  solve    run one engine on a problem; write trace, replay series,
           amortized series and a summary block
  market   run asynchronous tatonnement on a market description
  verify   run the property battery (prox oracle, inequality suite,
           matrix-family audits, gradient identities)
  bench    sweep worker counts for a parallel engine, emit CSV

Exit codes: 0 success, 1 verification/invariant failure, 2 usage or I/O
error.

File formats (all plain text, full double precision, locale-independent):

* problem files: INI. Either a generator recipe
  (``[problem] kind = ridge|lasso|sparse|lowerbound`` with ``n``, ``seed``
  and the generator's parameters) or an explicit instance
  (``kind = quadratic`` with ``[matrix] rowK = ...`` rows, ``[linear]``
  holding ``b`` and ``c0``, and ``[psi] kK = zero|abs w|hinge w|
  quadratic a b`` per coordinate).
* market files: INI. ``[market] goods = n`` plus one ``[buyerI]`` section
  per buyer (``budget``, ``utility = ces|leontief``, then ``rho``/``a`` or
  ``support``/``b``).
* traces: ``#``-prefixed metadata lines, then one update per line:
  ``t, k, dx, g_tilde, gamma, snapshot, ns``.
* series: CSV ``t, F, H, A, grad_err_sq, dx_sq`` (solver) or
  ``t, residual, phi`` (market); price traces:
  ``t, good, p_before, p_after, z_tilde, z_min, z_max``.
* summaries: ``key = value`` lines.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, engine, fileio, lowerbound, market as market_mod
from . import problems as problems_mod
from . import stepsize
from .errors import EnforcementError, InvalidParameterError
from .tolerances import monotone_slack

USAGE_ERROR = 2
CHECK_FAILED = 1

VERIFY_SUITES = ("prox", "lemmas", "lowerbound", "problems", "market")


def _load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        cp.read_string(p.read_text(encoding="utf-8"))
    return cp


def _load_problem(cp: configparser.ConfigParser, base: Path):
    if cp.has_option("solve", "problem_file"):
        path = base / cp.get("solve", "problem_file")
        if not path.is_file():
            raise FileNotFoundError(f"problem file not found: {path}")
        return fileio.problem_from_text(path.read_text(encoding="utf-8"))
    if cp.has_section("problem"):
        buf = "[problem]\n" + "\n".join(
            f"{k} = {v}" for k, v in cp["problem"].items()) + "\n"
        for sec in ("matrix", "linear", "psi"):
            if cp.has_section(sec):
                buf += f"[{sec}]\n" + "\n".join(
                    f"{k} = {v}" for k, v in cp[sec].items()) + "\n"
        return fileio.problem_from_text(buf)
    raise InvalidParameterError("config has neither problem_file nor [problem]")


def _resolve_gamma(cp, prob, eng: str, cfg: engine.AsyncConfig | None,
                   force: bool):
    info = prob.lipschitz
    if eng == "ccd":
        policy = stepsize.gamma_ccd(info.l_full, prob.n)
    elif eng == "scd":
        policy = float(info.l_diag.max())
    elif eng == "pacd":
        policy = stepsize.gamma_pacd(info.l_full, info.l_max, cfg.kappa_max,
                                     cfg.r, cfg.q, n=prob.n).gamma
    else:
        policy = stepsize.gamma_sacd(info.l_diag, info.l_res, prob.n).gamma
    raw = cp.get("solve", "gamma", fallback="auto")
    if raw == "auto":
        return policy
    gamma = float(raw)
    if gamma < policy:
        if not force:
            raise InvalidParameterError(
                f"gamma={gamma} is below the {eng} policy value {policy}; "
                "pass --force to proceed")
        print(f"warning: gamma={gamma} below policy value {policy}; "
              "proceeding (--force)", file=sys.stderr)
    return gamma


def cmd_solve(args) -> int:
    cp = _load_config(args.config)
    base = Path(args.config).parent if args.config else Path.cwd()
    prob = _load_problem(cp, base)
    eng = cp.get("solve", "engine", fallback="ccd")
    seed = args.seed if args.seed is not None else cp.getint("solve", "seed",
                                                             fallback=0)
    workers = args.workers if args.workers is not None else cp.getint(
        "solve", "workers", fallback=1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cfg = None
    if eng in ("pacd", "sacd"):
        cfg = engine.AsyncConfig(
            workers=workers,
            q=cp.getint("solve", "q", fallback=0),
            r=cp.getint("solve", "r", fallback=2 * prob.n),
            kappa_max=cp.getint("solve", "kappa_max", fallback=2),
            schedule=(engine.SCHEDULE_PARTITIONED if eng == "pacd"
                      else engine.SCHEDULE_UNIFORM),
            t_bar=cp.getint("solve", "t_bar", fallback=0),
            pseudo_rounds=cp.getint("solve", "pseudo_rounds", fallback=0),
            seed=seed)
    gamma = _resolve_gamma(cp, prob, eng, cfg, args.force)
    if eng == "sacd" and cfg.q == 0:
        cfg.q = stepsize.gamma_sacd(prob.lipschitz.l_diag,
                                    prob.lipschitz.l_res, prob.n,
                                    gamma=gamma).q_max or 0

    if eng == "ccd":
        trace = engine.ccd_solve(prob, gamma, cp.getint("solve", "epochs",
                                                        fallback=50))
    elif eng == "scd":
        trace = engine.scd_solve(prob, gamma, cp.getint("solve", "t_bar",
                                                        fallback=50 * prob.n),
                                 seed)
    elif eng == "pacd":
        trace = engine.pacd_run(prob, gamma, cfg)
    elif eng == "sacd":
        trace = engine.sacd_run(prob, gamma, cfg)
    else:
        raise InvalidParameterError(f"unknown engine {eng!r}")

    status = 0
    if trace.error:
        print(f"run aborted: {trace.error}", file=sys.stderr)
        status = CHECK_FAILED

    replay = analysis.replay_objective(prob, trace)
    q_for_a = cfg.q if cfg is not None else 0
    amort = analysis.amortized_H_series(replay, gamma, q_for_a)
    q_obs, audit = engine.measure_interference(trace)

    fileio.write_text(out / "trace.txt", fileio.trace_to_text(trace))
    fileio.write_text(out / "series.csv", fileio.series_to_csv(replay, amort))
    final_f = float(replay.f[-1])
    fields = {
        "engine": eng, "n": prob.n, "updates": len(trace),
        "gamma": repr(gamma), "workers": trace.workers,
        "wallclock_s": repr(trace.wallclock_s),
        "updates_per_s": repr(len(trace) / trace.wallclock_s
                              if trace.wallclock_s else math.inf),
        "final_F": repr(final_f),
        "q_observed": q_obs,
    }
    if prob.f_star is not None:
        fields["final_F_gap"] = repr(final_f - prob.f_star)
    slack = monotone_slack(replay.f[0])
    h_rise = amort.max_rise()
    fields["H_max_rise"] = repr(h_rise)
    if cfg is not None and cfg.q > 0 and q_obs > cfg.q:
        print(f"interference audit failed: {q_obs} > q={cfg.q}",
              file=sys.stderr)
        status = CHECK_FAILED
    if eng in ("ccd", "scd") and np.diff(replay.f).max(initial=-math.inf) > slack:
        print("objective increased on an accurate-gradient run", file=sys.stderr)
        status = CHECK_FAILED
    fileio.write_text(out / "summary.txt", fileio.summary_to_text(fields))
    print(fileio.summary_to_text(fields), end="")
    return status


def cmd_market(args) -> int:
    cp = _load_config(args.config)
    base = Path(args.config).parent if args.config else Path.cwd()
    if cp.has_option("tatonnement", "market_file"):
        path = base / cp.get("tatonnement", "market_file")
        if not path.is_file():
            raise FileNotFoundError(f"market file not found: {path}")
        mkt = fileio.market_from_text(path.read_text(encoding="utf-8"))
    elif cp.has_section("market"):
        buf = []
        for sec in cp.sections():
            if sec == "market" or sec.startswith("buyer"):
                buf.append(f"[{sec}]\n" + "\n".join(
                    f"{k} = {v}" for k, v in cp[sec].items()))
        mkt = fileio.market_from_text("\n".join(buf) + "\n")
    else:
        raise InvalidParameterError("config has neither market_file nor [market]")

    seed = args.seed if args.seed is not None else cp.getint(
        "tatonnement", "seed", fallback=0)
    config = market_mod.TatonnementConfig(
        lam=cp.getfloat("tatonnement", "lam", fallback=market_mod.LAMBDA_SAFE),
        horizon=cp.getfloat("tatonnement", "horizon", fallback=500.0),
        statistic=cp.get("tatonnement", "statistic",
                         fallback=market_mod.STAT_TIME_AVG),
        seed=seed)
    p0 = (fileio._parse_vec(cp.get("tatonnement", "p0"))
          if cp.has_option("tatonnement", "p0") else np.ones(mkt.n_goods))

    trace = market_mod.async_tatonnement_run(mkt, p0, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_text(out / "price_trace.txt",
                      fileio.price_trace_to_text(trace))
    fileio.write_text(out / "series.csv", fileio.market_series_to_csv(trace))

    audit = market_mod.step_size_audit(trace)
    min_margin = min((row.margin for row in audit), default=math.inf)
    phis = np.array([v for _, v in trace.phi_series])
    slack = monotone_slack(phis[0])
    phi_rise = float(np.diff(phis).max()) if phis.size > 1 else 0.0
    fields = {
        "goods": mkt.n_goods, "buyers": len(mkt.buyers),
        "events": len(trace.events), "lam": repr(config.lam),
        "final_residual": repr(trace.residual_series[-1][1]),
        "phi_max_rise": repr(phi_rise),
        "min_step_margin": repr(min_margin),
    }
    fileio.write_text(out / "summary.txt", fileio.summary_to_text(fields))
    print(fileio.summary_to_text(fields), end="")
    status = 0
    if phi_rise > slack:
        print("potential increased along the trace", file=sys.stderr)
        status = CHECK_FAILED
    return status


def _verify_prox(seed: int, samples: int, report: analysis.SuiteReport) -> None:
    """Closed-form prox against a golden-section search on the surrogate."""
    from .verify_oracles import prox_search_oracle
    import random
    from .prox import PsiSpec, prox_step
    from .tolerances import ORACLE_D_ATOL, ORACLE_W_ATOL

    rng = random.Random(seed)
    kinds = ["zero", "abs", "quadratic", "hinge"]
    for kind in kinds:
        worst_w = 0.0
        worst_d = 0.0
        for _ in range(samples):
            g = rng.gauss(0, 3)
            x = rng.gauss(0, 3)
            gamma = math.exp(rng.uniform(math.log(0.2), math.log(8.0)))
            if kind == "zero":
                psi = PsiSpec.zero()
            elif kind == "abs":
                psi = PsiSpec.abs_weighted(abs(rng.gauss(0, 2)))
            elif kind == "hinge":
                psi = PsiSpec.hinge_weighted(abs(rng.gauss(0, 2)))
            else:
                psi = PsiSpec.quadratic(abs(rng.gauss(0, 2)), rng.gauss(0, 2))
            step = prox_step(g, x, gamma, psi)
            d_o, w_o = prox_search_oracle(g, x, gamma, psi)
            worst_w = max(worst_w, abs(step.w_hat - w_o))
            worst_d = max(worst_d, abs(step.d_hat - d_o))
        report.add(f"prox-oracle-w[{kind}]", ORACLE_W_ATOL, worst_w, 0.0)
        report.add(f"prox-oracle-d[{kind}]", ORACLE_D_ATOL, worst_d, 0.0)


def _verify_lowerbound(report: analysis.SuiteReport) -> None:
    fam = lowerbound.build_lower_bound_matrix(25)
    est = lowerbound.spectral_norm(fam.rotation)
    report.add("rotation-spectrum-bound", fam.lambda_bar, est.value, 1e-9)
    floor = lowerbound.min_eigenvalue(fam.hessian)
    report.add("hessian-floor", floor, fam.lambda_bar - 1e-6, 1e-9)
    for n in (2, 10, 100, 300):
        b1, sum_abs = lowerbound.b_row_audit(n)
        report.add(f"b-row-bound[n={n}]", lowerbound.TWO_PI_SQ, sum_abs, 1e-9)
        report.add(f"b1-bound[n={n}]", math.pi ** 2 / 3.0, b1, 1e-9)
    for n in (2, 3, 16, 256, 4096):
        lhs, rhs, holds = lowerbound.harmonic_gap_check(n)
        report.add(f"harmonic-gap[n={n}]", lhs, rhs, 0.0)


def _verify_problems(seed: int, report: analysis.SuiteReport) -> None:
    from .verify_oracles import gradient_fd_error
    for name, prob in (("ridge", problems_mod.make_ridge(8, seed, 0.5)),
                       ("lasso", problems_mod.make_lasso(6, seed + 1, 0.3))):
        err = gradient_fd_error(prob, seed=seed, points=25)
        report.add(f"grad-fd[{name}]", 1e-5, err, 0.0)


def _verify_market(seed: int, report: analysis.SuiteReport) -> None:
    import random
    rng = np.random.default_rng(seed)
    mkt = market_mod.FisherMarket(3, [
        market_mod.Buyer(budget=1.0, kind="ces", rho=-1.0, a=(1.0, 0.5, 0.7)),
        market_mod.Buyer(budget=1.5, kind="leontief", support=(0, 2),
                         b=(1.0, 2.0)),
    ])
    worst = 0.0
    worst_budget = 0.0
    for _ in range(25):
        p = rng.uniform(0.2, 3.0, 3)
        worst = max(worst, market_mod.phi_gradient_check(mkt, p))
        bundles, _ = market_mod.demand(mkt, p)
        spend = bundles @ p
        for i, buyer in enumerate(mkt.buyers):
            worst_budget = max(worst_budget,
                               abs(spend[i] - buyer.budget) / buyer.budget)
    report.add("phi-gradient-identity", 1e-5, worst, 0.0)
    report.add("budget-identity", 1e-10, worst_budget, 0.0)


def cmd_verify(args) -> int:
    if args.samples is not None and args.samples < 1:
        raise InvalidParameterError("--samples must be >= 1")
    samples = args.samples or 500
    seed = args.seed if args.seed is not None else 0
    suites = VERIFY_SUITES if args.suite is None else (args.suite,)
    for s in suites:
        if s not in VERIFY_SUITES:
            raise InvalidParameterError(
                f"unknown suite {s!r}; choose from {', '.join(VERIFY_SUITES)}")
    report = analysis.SuiteReport()
    if "lemmas" in suites:
        report.checks.extend(analysis.lemma_suite(seed, samples).checks)
    if "prox" in suites:
        _verify_prox(seed, max(10, samples // 5), report)
    if "lowerbound" in suites:
        _verify_lowerbound(report)
    if "problems" in suites:
        _verify_problems(seed, report)
    if "market" in suites:
        _verify_market(seed, report)

    text = report.format() + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fileio.write_text(out / "verify_report.txt", text)
    bad = report.violations
    print(f"checks: {len(report.checks)}  violations: {len(bad)}")
    for line in bad:
        print(line.format())
    return 0 if not bad else CHECK_FAILED


def cmd_bench(args) -> int:
    cp = _load_config(args.config)
    base = Path(args.config).parent if args.config else Path.cwd()
    prob = _load_problem(cp, base)
    eng = cp.get("bench", "engine", fallback=cp.get("solve", "engine",
                                                    fallback="sacd"))
    if eng not in ("pacd", "sacd"):
        raise InvalidParameterError("bench requires a parallel engine (pacd|sacd)")
    worker_counts = [int(w) for w in cp.get("bench", "workers",
                                            fallback="1, 2, 4").replace(
                                                ",", " ").split()]
    seed = args.seed if args.seed is not None else cp.getint(
        "bench", "seed", fallback=0)
    target_ratio = cp.getfloat("bench", "target_gap_ratio", fallback=1e-4)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["workers,wallclock_s,updates_per_s,final_F,final_gap,"
            "q_observed,speedup,valid"]
    base_wall = None
    status = 0
    for w in worker_counts:
        if eng == "sacd":
            policy = stepsize.gamma_sacd(prob.lipschitz.l_diag,
                                         prob.lipschitz.l_res, prob.n,
                                         gamma=cp.getfloat("bench", "gamma",
                                                           fallback=None))
            cfg = engine.AsyncConfig(workers=w, q=policy.q_max or 0,
                                     schedule=engine.SCHEDULE_UNIFORM,
                                     t_bar=cp.getint("bench", "t_bar"),
                                     seed=seed)
            gamma = policy.gamma
            runner = engine.sacd_run
        else:
            cfg = engine.AsyncConfig(workers=w, q=cp.getint("bench", "q"),
                                     r=cp.getint("bench", "r"),
                                     kappa_max=cp.getint("bench", "kappa_max",
                                                         fallback=2),
                                     schedule=engine.SCHEDULE_PARTITIONED,
                                     pseudo_rounds=cp.getint(
                                         "bench", "pseudo_rounds"),
                                     seed=seed)
            gamma = stepsize.gamma_pacd(prob.lipschitz.l_full,
                                        prob.lipschitz.l_max, cfg.kappa_max,
                                        cfg.r, cfg.q, n=prob.n).gamma
            runner = engine.pacd_run
        valid = True
        try:
            trace = runner(prob, gamma, cfg)
            q_obs, _ = engine.measure_interference(trace)
            if trace.error or (cfg.q and q_obs > cfg.q):
                valid = False
        except EnforcementError:
            valid = False
            trace = None
            q_obs = -1
        if trace is None:
            rows.append(f"{w},,,,,{q_obs},,invalid")
            status = CHECK_FAILED
            continue
        final_f = prob.objective(trace.x_final)
        gap = final_f - prob.f_star if prob.f_star is not None else math.nan
        f0 = prob.objective(trace.x0)
        gap0 = f0 - prob.f_star if prob.f_star is not None else math.nan
        if math.isfinite(gap) and gap > target_ratio * gap0:
            valid = False
            status = CHECK_FAILED
        wall = trace.wallclock_s
        if base_wall is None:
            base_wall = wall
        rows.append(f"{w},{wall!r},{len(trace) / wall!r},{final_f!r},"
                    f"{gap!r},{q_obs},{base_wall / wall!r},"
                    f"{'ok' if valid else 'invalid'}")
    csv = "\n".join(rows) + "\n"
    fileio.write_text(out / "bench.csv", csv)
    print(csv, end="")
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parcd", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("solve", cmd_solve), ("market", cmd_market),
                     ("verify", cmd_verify), ("bench", cmd_bench)):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--force", action="store_true")
        p.add_argument("--suite", default=None)
        p.add_argument("--samples", type=int, default=None)
        p.set_defaults(fn=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (FileNotFoundError, InvalidParameterError,
            configparser.Error, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Plain-text file formats: problems, markets, traces, series, summaries.

Everything is diffable text. Config-style files are INI sections of
``key = value`` pairs; numeric columns are comma-separated with full
double precision (repr), locale-independent.
"""

from __future__ import annotations

import configparser
import io
from pathlib import Path

import numpy as np

from .engine import Trace, UpdateRecord
from .errors import InvalidParameterError
from .market import Buyer, FisherMarket, PriceTrace
from .problems import (CompositeProblem, QuadraticSmooth, make_lasso, make_lower_bound_problem, make_ridge,
                       make_sparse_quadratic)
from .prox import PsiSpec


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return ", ".join(_fmt(x) for x in v)


def _parse_vec(s: str) -> np.ndarray:
    return np.array([float(tok) for tok in s.replace(",", " ").split()])


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep key case
    return cp


# ---------------------------------------------------------------- problems

def _psi_to_text(psi: PsiSpec) -> str:
    if psi.kind == "zero":
        return "zero"
    if psi.kind == "abs":
        return f"abs {_fmt(psi.weight)}"
    if psi.kind == "hinge":
        return f"hinge {_fmt(psi.weight)}"
    return f"quadratic {_fmt(psi.curvature)} {_fmt(psi.slope)}"


def _psi_from_text(s: str) -> PsiSpec:
    parts = s.split()
    kind = parts[0]
    if kind == "zero":
        return PsiSpec.zero()
    if kind == "abs":
        return PsiSpec.abs_weighted(float(parts[1]))
    if kind == "hinge":
        return PsiSpec.hinge_weighted(float(parts[1]))
    if kind == "quadratic":
        return PsiSpec.quadratic(float(parts[1]), float(parts[2]))
    raise InvalidParameterError(f"unknown psi spec {s!r}")


def problem_to_text(problem: CompositeProblem) -> str:
    cp = _new_parser()
    recipe = problem.recipe
    if recipe.get("kind") in ("ridge", "lasso", "sparse", "lowerbound"):
        cp["problem"] = {k: str(v) for k, v in recipe.items()}
    else:
        if not isinstance(problem.smooth, QuadraticSmooth):
            raise InvalidParameterError("cannot serialize this problem explicitly")
        cp["problem"] = {"kind": "quadratic", "n": str(problem.n)}
        cp["matrix"] = {f"row{k}": _fmt_vec(problem.smooth.m[k])
                        for k in range(problem.n)}
        cp["linear"] = {"b": _fmt_vec(problem.smooth.b),
                        "c0": _fmt(problem.smooth.c0)}
        cp["psi"] = {f"k{k}": _psi_to_text(problem.psis[k])
                     for k in range(problem.n)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def problem_from_text(text: str) -> CompositeProblem:
    cp = _new_parser()
    cp.read_string(text)
    sec = cp["problem"]
    kind = sec.get("kind")
    if kind == "ridge":
        return make_ridge(int(sec["n"]), int(sec["seed"]),
                          float(sec["curvature"]),
                          m_rows=int(sec["m_rows"]) if "m_rows" in sec else None)
    if kind == "lasso":
        return make_lasso(int(sec["n"]), int(sec["seed"]),
                          float(sec["reg_weight"]),
                          m_rows=int(sec["m_rows"]) if "m_rows" in sec else None)
    if kind == "sparse":
        return make_sparse_quadratic(int(sec["n"]), int(sec["seed"]),
                                     degree=int(sec.get("degree", 4)),
                                     coupling=float(sec.get("coupling", 0.05)),
                                     b_scale=float(sec.get("b_scale", 0.1)))
    if kind == "lowerbound":
        return make_lower_bound_problem(int(sec["n"]))
    if kind == "quadratic":
        n = int(sec["n"])
        m = np.vstack([_parse_vec(cp["matrix"][f"row{k}"]) for k in range(n)])
        b = _parse_vec(cp["linear"]["b"])
        c0 = float(cp["linear"].get("c0", "0.0"))
        psis = [_psi_from_text(cp["psi"][f"k{k}"]) for k in range(n)]
        from .prox import LipschitzInfo
        smooth = QuadraticSmooth(m, b, c0)
        return CompositeProblem(smooth, psis, LipschitzInfo.from_hessian(m),
                                recipe={"kind": "quadratic"})
    raise InvalidParameterError(f"unknown problem kind {kind!r}")


def problems_equal(a: CompositeProblem, b: CompositeProblem) -> bool:
    if a.n != b.n or [p for p in a.psis] != [p for p in b.psis]:
        return False
    xa = np.linspace(-1.0, 1.0, a.n) + 0.25
    return (a.objective(xa) == b.objective(xa)
            and np.array_equal(a.smooth.grad_full(xa), b.smooth.grad_full(xa)))


# ------------------------------------------------------------------ market

def market_to_text(market: FisherMarket) -> str:
    cp = _new_parser()
    cp["market"] = {"goods": str(market.n_goods)}
    for i, buyer in enumerate(market.buyers):
        sec = {"budget": _fmt(buyer.budget), "utility": buyer.kind}
        if buyer.kind == "ces":
            sec["rho"] = _fmt(buyer.rho)
            sec["a"] = _fmt_vec(buyer.a)
        else:
            sec["support"] = ", ".join(str(j) for j in buyer.support)
            sec["b"] = _fmt_vec(buyer.b)
        cp[f"buyer{i}"] = sec
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def market_from_text(text: str) -> FisherMarket:
    cp = _new_parser()
    cp.read_string(text)
    n = int(cp["market"]["goods"])
    buyers = []
    i = 0
    while cp.has_section(f"buyer{i}"):
        sec = cp[f"buyer{i}"]
        if sec["utility"] == "ces":
            buyers.append(Buyer(budget=float(sec["budget"]), kind="ces",
                                rho=float(sec["rho"]),
                                a=tuple(_parse_vec(sec["a"]))))
        else:
            support = tuple(int(t) for t in sec["support"].replace(",", " ").split())
            buyers.append(Buyer(budget=float(sec["budget"]), kind="leontief",
                                support=support, b=tuple(_parse_vec(sec["b"]))))
        i += 1
    return FisherMarket(n_goods=n, buyers=buyers)


# ------------------------------------------------------------------ traces

def trace_to_text(trace: Trace) -> str:
    lines = [
        f"# schedule = {trace.schedule}",
        f"# gamma = {_fmt(trace.gamma)}",
        f"# workers = {trace.workers}",
        f"# x0 = {_fmt_vec(trace.x0)}",
        f"# x_final = {_fmt_vec(trace.x_final)}",
        "# columns: t, k, dx, g_tilde, gamma, snapshot, ns",
    ]
    if trace.error:
        lines.append(f"# error = {trace.error}")
    g = _fmt(trace.gamma)
    for t in range(1, len(trace) + 1):
        i = t - 1
        lines.append(f"{t},{trace.k[i]},{_fmt(trace.dx[i])},"
                     f"{_fmt(trace.g_tilde[i])},{g},{trace.snapshot[i]},"
                     f"{trace.ns[i]}")
    return "\n".join(lines) + "\n"


def trace_from_text(text: str) -> Trace:
    meta = {}
    records = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, val = body.split("=", 1)
                meta[key.strip()] = val.strip()
            continue
        toks = line.split(",")
        records.append(UpdateRecord(t=int(toks[0]), k=int(toks[1]),
                                    dx=float(toks[2]), g_tilde=float(toks[3]),
                                    gamma=float(toks[4]), snapshot=int(toks[5]),
                                    ns=int(toks[6])))
    x0 = _parse_vec(meta["x0"])
    trace = Trace.from_records(records, gamma=float(meta["gamma"]),
                               schedule=meta["schedule"], x0=x0,
                               workers=int(meta.get("workers", 1)))
    if "x_final" in meta:
        trace.x_final = _parse_vec(meta["x_final"])
    if "error" in meta:
        trace.error = meta["error"]
    return trace


def series_to_csv(replay, amortized=None) -> str:
    lines = ["t,F,H,A,grad_err_sq,dx_sq"]
    a = amortized.a if amortized is not None else np.zeros(len(replay) + 1)
    h = amortized.h if amortized is not None else replay.f
    lines.append(f"0,{_fmt(replay.f[0])},{_fmt(h[0])},{_fmt(a[0])},,")
    for t in range(1, len(replay) + 1):
        lines.append(f"{t},{_fmt(replay.f[t])},{_fmt(h[t])},{_fmt(a[t])},"
                     f"{_fmt(replay.grad_err_sq[t - 1])},"
                     f"{_fmt(replay.dx_sq[t - 1])}")
    return "\n".join(lines) + "\n"


def summary_to_text(fields: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in fields.items())


def price_trace_to_text(trace: PriceTrace) -> str:
    lines = [f"# lam = {_fmt(trace.config.lam)}",
             f"# horizon = {_fmt(trace.config.horizon)}",
             f"# statistic = {trace.config.statistic}",
             f"# p0 = {_fmt_vec(trace.p0)}",
             "# columns: t, good, p_before, p_after, z_tilde, z_min, z_max"]
    for ev in trace.events:
        lines.append(f"{_fmt(ev.t)},{ev.good},{_fmt(ev.p_before)},"
                     f"{_fmt(ev.p_after)},{_fmt(ev.z_tilde)},"
                     f"{_fmt(ev.z_min)},{_fmt(ev.z_max)}")
    return "\n".join(lines) + "\n"


def market_series_to_csv(trace: PriceTrace) -> str:
    lines = ["t,residual,phi"]
    for (t, res), (_, ph) in zip(trace.residual_series, trace.phi_series):
        lines.append(f"{_fmt(t)},{_fmt(res)},{_fmt(ph)}")
    return "\n".join(lines) + "\n"


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")

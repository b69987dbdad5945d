"""Fisher markets and asynchronous tatonnement.

Buyers hold fixed budgets and either complementary-CES utilities
(rho < 0, so the elasticity sigma = 1/(1-rho) lies in (0,1)) or Leontief
utilities over a subset of goods. Each good has unit supply. Sellers update
their own price from the excess demand they observed since their previous
update:

    p_j <- p_j * (1 + lambda * min(z~_j, 1) * (t - alpha_j(t)))

where z~_j is a statistic of the instantaneous excess demand over the
elapsed interval. The simulator is a single-threaded discrete-event loop:
prices are piecewise constant between events, so interval minima, maxima
and time-weighted averages of the excess demand are exact.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

STAT_TIME_AVG = "time-weighted-average"
STAT_RANDOM_INSTANT = "random-instant"
STAT_LATEST = "latest-instant"

LAMBDA_SAFE = 1.0 / 37.0
DEMAND_STEP_RATIO = 33.0 / 2.0   # per-update requirement on the implied curvature


@dataclass(frozen=True)
class Buyer:
    """budget plus a CES(rho<0) or Leontief utility.

    CES: utility (sum_l a_l x_l^rho)^(1/rho), coefficients a_l >= 0, not all 0.
    Leontief: min_{l in S} b_l x_l with b_l > 0 on the support S.
    """

    budget: float
    kind: str                       # 'ces' | 'leontief'
    rho: float = -1.0               # CES only; must be < 0
    a: tuple[float, ...] = ()       # CES coefficients, length n
    support: tuple[int, ...] = ()   # Leontief S
    b: tuple[float, ...] = ()       # Leontief rates on S

    def __post_init__(self):
        if self.budget <= 0:
            raise InvalidParameterError("budget must be positive")
        if self.kind == "ces":
            if not self.rho < 0:
                raise InvalidParameterError(
                    "only complementary CES (rho < 0) is supported")
            if not self.a or min(self.a) < 0 or max(self.a) <= 0:
                raise InvalidParameterError(
                    "CES coefficients must be nonnegative, not all zero")
        elif self.kind == "leontief":
            if not self.support:
                raise InvalidParameterError("Leontief support must be nonempty")
            if len(self.b) != len(self.support) or min(self.b) <= 0:
                raise InvalidParameterError("Leontief rates must be positive")
        else:
            raise InvalidParameterError(f"unknown utility kind {self.kind!r}")

    @property
    def sigma(self) -> float:
        return 1.0 / (1.0 - self.rho)


@dataclass
class FisherMarket:
    n_goods: int
    buyers: list[Buyer]

    def __post_init__(self):
        if self.n_goods < 1 or not self.buyers:
            raise InvalidParameterError("need at least one good and one buyer")
        demanded = np.zeros(self.n_goods, dtype=bool)
        for buyer in self.buyers:
            if buyer.kind == "ces":
                if len(buyer.a) != self.n_goods:
                    raise InvalidParameterError("CES coefficient length mismatch")
                demanded |= np.asarray(buyer.a) > 0
            else:
                if max(buyer.support) >= self.n_goods or min(buyer.support) < 0:
                    raise InvalidParameterError("Leontief support out of range")
                demanded[list(buyer.support)] = True
        self.undemanded = [int(j) for j in np.nonzero(~demanded)[0]]
        if self.undemanded:
            import warnings
            warnings.warn(
                f"goods {self.undemanded} are demanded by no buyer; their "
                "equilibrium price is 0", stacklevel=2)


def _check_prices(p: np.ndarray) -> None:
    if (p <= 0).any():
        raise InvalidParameterError("all prices must be positive")


def buyer_demand(buyer: Buyer, p: np.ndarray) -> np.ndarray:
    x = np.zeros(p.size)
    if buyer.kind == "ces":
        sig = buyer.sigma
        a = np.asarray(buyer.a)
        num = np.where(a > 0, a ** sig * p ** (-sig), 0.0)
        den = float(np.where(a > 0, a ** sig * p ** (1 - sig), 0.0).sum())
        x[:] = buyer.budget * num / den
    else:
        idx = list(buyer.support)
        rates = np.asarray(buyer.b)
        den = float((p[idx] / rates).sum())
        x[idx] = (buyer.budget / rates) / den
    return x


def demand(market: FisherMarket, p) -> tuple[np.ndarray, np.ndarray]:
    """Per-buyer bundles (rows) and aggregate demand per good."""
    p = np.asarray(p, dtype=float)
    _check_prices(p)
    bundles = np.stack([buyer_demand(buyer, p) for buyer in market.buyers])
    return bundles, bundles.sum(axis=0)


def excess_demand(market: FisherMarket, p) -> np.ndarray:
    """z_j = aggregate demand minus unit supply."""
    _, x = demand(market, p)
    return x - 1.0


def phi(market: FisherMarket, p) -> float:
    """Convex potential with gradient identity grad_k phi = -z_k.

    phi(p) = sum_j p_j - sum_i e_i * ln P_i(p) + sum_i e_i * ln e_i, where
    P_i is the buyer's unit-cost index: (sum_l a_l^sigma p_l^(1-sigma))^(1/(1-sigma))
    for CES, sum_{l in S} p_l / b_l for Leontief.
    """
    p = np.asarray(p, dtype=float)
    _check_prices(p)
    val = float(p.sum())
    for buyer in market.buyers:
        if buyer.kind == "ces":
            sig = buyer.sigma
            a = np.asarray(buyer.a)
            s = float(np.where(a > 0, a ** sig * p ** (1 - sig), 0.0).sum())
            log_index = math.log(s) / (1.0 - sig)
        else:
            idx = list(buyer.support)
            rates = np.asarray(buyer.b)
            log_index = math.log(float((p[idx] / rates).sum()))
        val += -buyer.budget * log_index + buyer.budget * math.log(buyer.budget)
    return val


def phi_gradient_check(market: FisherMarket, p, rel_step: float = 1e-6) -> float:
    """Max relative error of central-difference grad(phi) against -z."""
    p = np.asarray(p, dtype=float)
    z = excess_demand(market, p)
    worst = 0.0
    for k in range(p.size):
        h = rel_step * p[k]
        hi = p.copy(); hi[k] += h
        lo = p.copy(); lo[k] -= h
        g = (phi(market, hi) - phi(market, lo)) / (2 * h)
        worst = max(worst, abs(g + z[k]) / max(1.0, abs(z[k])))
    return worst


def sync_tatonnement_step(p, z, lam: float) -> np.ndarray:
    """All prices move simultaneously: p'_j = p_j * (1 + lam*min(z_j, 1))."""
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    if not lam > 0:
        raise InvalidParameterError("lam must be positive")
    _check_prices(p)
    p_new = p * (1.0 + lam * np.minimum(z, 1.0))
    if (p_new <= 0).any():
        raise InvalidParameterError(
            "step drove a price nonpositive; lam must be < 1")
    return p_new


@dataclass
class TatonnementConfig:
    lam: float = LAMBDA_SAFE
    horizon: float = 500.0
    statistic: str = STAT_TIME_AVG
    seed: int = 0
    period_lo: float = 0.5
    period_hi: float = 1.0
    jitter: float = 0.1

    def validate(self) -> None:
        if not 0 < self.lam <= LAMBDA_SAFE + 1e-15:
            import warnings
            warnings.warn(f"lam={self.lam} outside the proven range "
                          f"(0, {LAMBDA_SAFE:.6f}]", stacklevel=2)
        if self.horizon <= 1:
            raise InvalidParameterError("horizon must exceed one day")
        if self.statistic not in (STAT_TIME_AVG, STAT_RANDOM_INSTANT, STAT_LATEST):
            raise InvalidParameterError(f"unknown statistic {self.statistic!r}")


@dataclass
class PriceEvent:
    t: float
    good: int
    p_before: float
    p_after: float
    z_tilde: float
    z_min: float     # interval minimum of the instantaneous excess demand
    z_max: float
    dt: float


@dataclass
class PriceTrace:
    market: FisherMarket
    config: TatonnementConfig
    p0: np.ndarray
    events: list[PriceEvent] = field(default_factory=list)
    phi_series: list[tuple[float, float]] = field(default_factory=list)
    residual_series: list[tuple[float, float]] = field(default_factory=list)
    p_final: np.ndarray | None = None


def _event_schedule(n: int, config: TatonnementConfig) -> list[tuple[float, int]]:
    """Per-seller jittered periodic events; gaps are clipped at one day so
    every price is updated at least once per unit interval."""
    rng = random.Random(f"schedule:{config.seed}")
    events = []
    for j in range(n):
        period = rng.uniform(config.period_lo, config.period_hi)
        t = rng.uniform(0.0, min(period, 1.0))
        while t < config.horizon:
            events.append((t, j))
            gap = period * (1.0 + config.jitter * rng.uniform(-1.0, 1.0))
            t += min(gap, 1.0)
    events.sort()
    return events


def async_tatonnement_run(market: FisherMarket, p0,
                          config: TatonnementConfig) -> PriceTrace:
    """Continuous-time discrete-event loop over the sellers' update events.

    Prices are piecewise constant between events, so the configured z~
    statistic and the interval extrema are computed exactly from the event
    log. A z~ outside [interval min, interval max] or a nonpositive price is
    a hard failure.
    """
    config.validate()
    p = np.asarray(p0, dtype=float).copy()
    _check_prices(p)
    n = market.n_goods
    rng = random.Random(f"stat:{config.seed}")
    trace = PriceTrace(market=market, config=config, p0=p.copy())

    events = _event_schedule(n, config)
    alpha = np.zeros(n)                   # last update time per good
    seg_t = [0.0]                         # segment start times
    seg_z = [excess_demand(market, p)]    # z on [seg_t[i], seg_t[i+1])
    trace.phi_series.append((0.0, phi(market, p)))
    trace.residual_series.append((0.0, equilibrium_residual(market, p)))

    # index of the first segment that can still overlap an open interval;
    # segments older than min_j alpha_j can be dropped lazily
    base = 0
    for (t, j) in events:
        t0 = float(alpha[j])
        # locate the first segment overlapping (t0, t]
        i0 = base
        while i0 + 1 < len(seg_t) and seg_t[i0 + 1] <= t0:
            i0 += 1
        acc = 0.0
        z_min = math.inf
        z_max = -math.inf
        spans = []
        for i in range(i0, len(seg_t)):
            s = max(seg_t[i], t0)
            e = seg_t[i + 1] if i + 1 < len(seg_t) else t
            e = min(e, t)
            if e <= s:
                continue
            zj = float(seg_z[i][j])
            acc += zj * (e - s)
            z_min = min(z_min, zj)
            z_max = max(z_max, zj)
            spans.append((s, e, zj))
        dt = t - t0
        if config.statistic == STAT_TIME_AVG:
            z_tilde = acc / dt
        elif config.statistic == STAT_LATEST:
            z_tilde = spans[-1][2]
        else:
            u = t0 + rng.random() * dt
            z_tilde = spans[-1][2]
            for (s, e, zj) in spans:
                if s <= u < e:
                    z_tilde = zj
                    break
        if not (z_min - 1e-12 <= z_tilde <= z_max + 1e-12):
            raise AssertionError(
                f"z~={z_tilde} outside interval range [{z_min}, {z_max}]")

        p_before = float(p[j])
        p_after = p_before * (1.0 + config.lam * min(z_tilde, 1.0) * dt)
        if not p_after > 0:
            raise AssertionError(f"price of good {j} driven nonpositive at t={t}")
        p[j] = p_after
        alpha[j] = t
        z_now = excess_demand(market, p)
        seg_t.append(t)
        seg_z.append(z_now)
        trace.events.append(PriceEvent(t=t, good=j, p_before=p_before,
                                       p_after=p_after, z_tilde=z_tilde,
                                       z_min=z_min, z_max=z_max, dt=dt))
        trace.phi_series.append((t, phi(market, p)))
        trace.residual_series.append(
            (t, float(np.abs(np.where(p > 0, z_now, np.maximum(z_now, 0.0))).max())))
        while base + 1 < len(seg_t) and seg_t[base + 1] <= float(alpha.min()):
            base += 1

    trace.p_final = p.copy()
    return trace


def equilibrium_residual(market: FisherMarket, p, tol_price: float | None = None,
                         p0_scale: float | None = None) -> float:
    """Max over goods of |z_j| where p_j > tol_price, else max(z_j, 0).

    tol_price defaults to 1e-8 times the largest starting price (or the
    largest current price when no scale is given).
    """
    p = np.asarray(p, dtype=float)
    if (p < 0).any():
        raise InvalidParameterError("prices must be nonnegative")
    if tol_price is None:
        scale = p0_scale if p0_scale is not None else float(p.max())
        tol_price = 1e-8 * scale
    # demand needs positive prices; clamp zero prices for the evaluation
    z = excess_demand(market, np.maximum(p, max(tol_price, 1e-300)))
    contrib = np.where(p > tol_price, np.abs(z), np.maximum(z, 0.0))
    return float(contrib.max())


@dataclass
class StepSizeAuditRow:
    t: float
    good: int
    implied_gamma: float
    requirement: float

    @property
    def margin(self) -> float:
        return self.implied_gamma - self.requirement


def step_size_audit(trace: PriceTrace) -> list[StepSizeAuditRow]:
    """Per update: implied curvature max(z~,1)/(lam * p_before) against the
    demand-side requirement (33/2) * x_j(p_before) / p_before. Margins are
    expected nonnegative whenever lam <= 1/37."""
    lam = trace.config.lam
    market = trace.market
    p = trace.p0.copy()
    rows = []
    for ev in trace.events:
        _, x = demand(market, p)
        implied = max(ev.z_tilde, 1.0) / (lam * ev.p_before)
        req = DEMAND_STEP_RATIO * float(x[ev.good]) / ev.p_before
        rows.append(StepSizeAuditRow(t=ev.t, good=ev.good,
                                     implied_gamma=implied, requirement=req))
        p[ev.good] = ev.p_after
    return rows

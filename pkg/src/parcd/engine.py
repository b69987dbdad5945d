"""Coordinate-descent engines over a shared coordinate store.

Four engines share one update rule (read a per-cell snapshot, compute the
partial gradient there, re-read the target cell, apply the closed-form
proximal displacement, commit):

* ``ccd_solve``  - serialized, fixed cyclic order, accurate gradients
* ``scd_solve``  - serialized, uniformly random coordinate per update
* ``pacd_run``   - threads owning coordinate blocks, cyclic within a block
* ``sacd_run``   - threads drawing uniform coordinates from per-worker streams

"Time" is the commit index assigned by fetch-and-add on the committed
counter. An update's interference is the number of commits between the
committed-counter snapshot taken when its read phase began and its own
commit. Two gates keep interference within a configured bound q for the
parallel engines:

* the admission gate (start side): a worker may begin a new iteration only
  while started - committed <= q/2;
* the commit guard (finish side): a commit may not advance the committed
  counter past any in-flight update's budget. Update W with start snapshot
  s must commit by counter value s + q; a committer X additionally reserves
  one slot for every in-flight update older than W, which keeps the guard
  deadlock-free (the oldest in-flight update always passes).

The start gate alone bounds how many updates are in flight; it cannot bound
interference when a thread is preempted between read and commit, which is
routine under a timesliced scheduler, so the commit guard is what makes the
interference bound hard rather than probabilistic.

Per-coordinate update frequency (at least once, at most kappa_max times per
round of r commits) is enforced by pseudo-rounds: each worker commits at
most k_stop = floor(r/2n) passes over its coordinates per pseudo-round,
a pseudo-round ending when every coordinate has been updated at least once
in it, detected by three shared counters whose roles rotate.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EnforcementError, InvalidParameterError
from .problems import CompositeProblem

SCHEDULE_CYCLIC = "cyclic"
SCHEDULE_PARTITIONED = "partitioned-cyclic"
SCHEDULE_UNIFORM = "uniform-random"


def worker_stream_seed(seed: int, worker: int) -> str:
    return f"{seed}:{worker}"


@dataclass
class AsyncConfig:
    """Parallel-run parameters and enforcement switches."""

    workers: int = 1
    q: int = 0                   # interference bound
    r: int = 0                   # round length (partitioned schedule)
    kappa_max: int = 1           # per-round per-coordinate cap
    schedule: str = SCHEDULE_PARTITIONED
    t_bar: int = 0               # total updates (uniform schedule)
    pseudo_rounds: int = 0       # number of rounds (partitioned schedule)
    admission_gate: bool = True
    commit_guard: bool = True
    round_enforcement: bool = True
    seed: int = 0

    def validate(self, n: int) -> None:
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")
        if self.q < 0:
            raise InvalidParameterError("q must be >= 0")
        if self.schedule == SCHEDULE_PARTITIONED:
            if self.r < n:
                raise InvalidParameterError(f"round length r={self.r} must be >= n={n}")
            if self.round_enforcement and self.r < 2 * n:
                raise InvalidParameterError(
                    "round enforcement needs r >= 2n so that k_stop >= 1")
            if self.pseudo_rounds < 1:
                raise InvalidParameterError("pseudo_rounds must be >= 1")
        elif self.schedule == SCHEDULE_UNIFORM:
            if self.t_bar < 1:
                raise InvalidParameterError("t_bar must be >= 1")
        else:
            raise InvalidParameterError(f"unknown schedule {self.schedule!r}")


@dataclass(frozen=True)
class UpdateRecord:
    t: int                 # commit index, dense 1..T
    k: int                 # coordinate updated
    dx: float              # committed displacement
    g_tilde: float         # partial gradient used (possibly stale)
    gamma: float
    snapshot: int          # committed counter when the read phase began
    ns: int                # wallclock at commit (0 in serialized mode)

    @property
    def interference(self) -> int:
        return self.t - 1 - self.snapshot


class Trace:
    """Commit-ordered log of one run, stored as column arrays."""

    def __init__(self, k, dx, g_tilde, snapshot, ns, gamma: float,
                 schedule: str, x0: np.ndarray, x_final: np.ndarray,
                 workers: int, config: AsyncConfig | None = None,
                 problem: CompositeProblem | None = None,
                 wallclock_s: float = 0.0, error: str | None = None):
        self.k = np.asarray(k, dtype=np.int64)
        self.dx = np.asarray(dx, dtype=float)
        self.g_tilde = np.asarray(g_tilde, dtype=float)
        self.snapshot = np.asarray(snapshot, dtype=np.int64)
        self.ns = np.asarray(ns, dtype=np.int64)
        self.gamma = float(gamma)
        self.schedule = schedule
        self.x0 = np.asarray(x0, dtype=float).copy()
        self.x_final = np.asarray(x_final, dtype=float).copy()
        self.workers = workers
        self.config = config
        self.problem = problem
        self.wallclock_s = wallclock_s
        self.error = error

    def __len__(self) -> int:
        return self.k.size

    def record(self, t: int) -> UpdateRecord:
        """Record of the update committed at time t (1-based)."""
        i = t - 1
        return UpdateRecord(t=t, k=int(self.k[i]), dx=float(self.dx[i]),
                           g_tilde=float(self.g_tilde[i]), gamma=self.gamma,
                           snapshot=int(self.snapshot[i]), ns=int(self.ns[i]))

    def __iter__(self):
        return (self.record(t) for t in range(1, len(self) + 1))

    @property
    def interference(self) -> np.ndarray:
        t = np.arange(1, len(self) + 1, dtype=np.int64)
        return t - 1 - self.snapshot

    @staticmethod
    def from_records(records, gamma, schedule, x0, problem=None,
                     workers=1, config=None):
        """Build a trace from explicit records (test fixtures, file import)."""
        records = list(records)
        x_final = np.asarray(x0, dtype=float).copy()
        for rec in records:
            x_final[rec.k] += rec.dx
        return Trace(
            k=[r.k for r in records], dx=[r.dx for r in records],
            g_tilde=[r.g_tilde for r in records],
            snapshot=[r.snapshot for r in records],
            ns=[r.ns for r in records], gamma=gamma, schedule=schedule,
            x0=x0, x_final=x_final, workers=workers, config=config,
            problem=problem)


class EngineAbort(RuntimeError):
    """A run hit a non-finite quantity or a worker failed."""


def _psi_arrays(problem: CompositeProblem):
    codes = np.array([p.code for p in problem.psis], dtype=np.int64)
    p1 = np.array([p.params[0] for p in problem.psis])
    p2 = np.array([p.params[1] for p in problem.psis])
    return codes, p1, p2


def _check_gamma_floor(problem: CompositeProblem, gamma: float) -> None:
    floor = float(problem.lipschitz.l_diag.max())
    if gamma < floor * (1.0 - 1e-12):   # tolerate rounding in the constants
        raise InvalidParameterError(
            f"gamma={gamma} below the per-coordinate floor max_j L_j={floor}")


def _run_serial(problem: CompositeProblem, gamma: float, coords,
                schedule: str, x0: np.ndarray | None) -> Trace:
    n = problem.n
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    start = x.copy()
    codes, p1, p2 = _psi_arrays(problem)
    prox = _kernels.prox_step
    grad = problem.grad_coord
    ks, dxs, gts, snaps = [], [], [], []
    t0 = time.perf_counter()
    t = 0
    for k in coords:
        g = grad(k, x)
        if not math.isfinite(g):
            raise EngineAbort(f"non-finite partial gradient at coordinate {k}, "
                              f"update {t + 1}")
        d, _ = prox(codes[k], g, float(x[k]), gamma, p1[k], p2[k])
        x[k] += d
        ks.append(k)
        dxs.append(d)
        gts.append(g)
        snaps.append(t)
        t += 1
    wall = time.perf_counter() - t0
    return Trace(ks, dxs, gts, snaps, np.zeros(t, dtype=np.int64), gamma,
                 schedule, start, x, workers=1, problem=problem,
                 wallclock_s=wall)


def ccd_solve(problem: CompositeProblem, gamma: float, epochs: int,
              x0: np.ndarray | None = None) -> Trace:
    """Cyclic coordinate descent: coordinates 0..n-1 repeated, accurate
    gradients throughout."""
    if epochs < 1:
        raise InvalidParameterError("epochs must be >= 1")
    _check_gamma_floor(problem, gamma)
    n = problem.n
    coords = (k for _ in range(epochs) for k in range(n))
    return _run_serial(problem, gamma, coords, SCHEDULE_CYCLIC, x0)


def scd_solve(problem: CompositeProblem, gamma: float, t_bar: int, seed: int,
              x0: np.ndarray | None = None) -> Trace:
    """Sequential stochastic coordinate descent, deterministic in seed."""
    import random
    if t_bar < 1:
        raise InvalidParameterError("t_bar must be >= 1")
    _check_gamma_floor(problem, gamma)
    rng = random.Random(worker_stream_seed(seed, 0))
    n = problem.n
    coords = (rng.randrange(n) for _ in range(t_bar))
    return _run_serial(problem, gamma, coords, SCHEDULE_UNIFORM, x0)


class _Shared:
    """State shared by the workers of one parallel run."""

    def __init__(self, n: int, config: AsyncConfig):
        self.cond = threading.Condition()
        self.started = 0
        self.committed = 0
        self.selections = 0
        self.inflight: dict[int, int] = {}   # ticket -> snapshot, ticket order
        self.last_commit = np.zeros(n, dtype=np.int64)
        self.config = config
        self.failure: BaseException | None = None
        # pseudo-round machinery: 3 counters with rotating roles
        self.round_idx = 0
        self.round_counters = [0, 0, 0]
        self.last_round = np.full(n, -1, dtype=np.int64)

    # -- gates (call with self.cond held) --

    def admission_ok(self) -> bool:
        if not self.config.admission_gate:
            return True
        return self.started - self.committed <= self.config.q // 2

    def commit_ok(self, ticket: int) -> bool:
        if not self.config.commit_guard:
            return True
        q = self.config.q
        rank = 0
        for other, snap in self.inflight.items():
            if other == ticket:
                continue
            # one commit slot is reserved for each in-flight update older
            # than `other`; without the reservation two updates sharing a
            # snapshot could block each other at the budget boundary
            if self.committed + 1 + rank - snap > q:
                return False
            rank += 1
        return True

    def fail(self, exc: BaseException) -> None:
        with self.cond:
            if self.failure is None:
                self.failure = exc
            self.cond.notify_all()


def _merge_buffers(buffers):
    merged = []
    for buf in buffers:
        merged.extend(buf)
    merged.sort(key=lambda rec: rec[0])
    if not merged:
        return [], [], [], [], []
    ts, ks, dxs, gts, snaps, nss = zip(*[(m[0], m[1], m[2], m[3], m[4], m[5])
                                         for m in merged])
    expect = tuple(range(1, len(ts) + 1))
    if ts != expect:
        raise EnforcementError("commit indices are not dense 1..T")
    return ks, dxs, gts, snaps, nss


def _parallel_run(problem: CompositeProblem, gamma: float,
                  config: AsyncConfig, x0: np.ndarray | None,
                  worker_fn_factory) -> Trace:
    n = problem.n
    config.validate(n)
    _check_gamma_floor(problem, gamma)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    start = x.copy()
    shared = _Shared(n, config)
    buffers = [[] for _ in range(config.workers)]
    serialized = config.workers == 1

    threads = []
    t0 = time.perf_counter()
    for w in range(config.workers):
        fn = worker_fn_factory(w, shared, x, buffers[w], serialized)
        th = threading.Thread(target=fn, name=f"parcd-worker-{w}", daemon=True)
        threads.append(th)
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    wall = time.perf_counter() - t0

    ks, dxs, gts, snaps, nss = _merge_buffers(buffers)
    error = None
    if shared.failure is not None:
        error = f"{type(shared.failure).__name__}: {shared.failure}"
    trace = Trace(ks, dxs, gts, snaps, nss, gamma, config.schedule, start, x,
                  workers=config.workers, config=config, problem=problem,
                  wallclock_s=wall, error=error)
    if error is not None:
        return trace
    if config.admission_gate and config.commit_guard and len(trace):
        q_obs = int(trace.interference.max())
        if q_obs > config.q:
            raise EnforcementError(
                f"observed interference {q_obs} exceeds q={config.q} "
                "with enforcement on")
    return trace


def _make_update_fns(problem, gamma, shared, x, buffer, serialized):
    """Shared read/commit phases used by both parallel engines."""
    codes, p1, p2 = _psi_arrays(problem)
    prox = _kernels.prox_step
    grad = problem.grad_coord
    cond = shared.cond
    cfg = shared.config

    def begin() -> tuple[int, int]:
        with cond:
            while not shared.admission_ok():
                if shared.failure is not None:
                    raise EngineAbort("peer worker failed")
                cond.wait()
            ticket = shared.started
            shared.started += 1
            snap = shared.committed
            shared.inflight[ticket] = snap
            return ticket, snap

    def compute(k: int) -> float:
        # per-cell snapshot of the live vector; staleness relative to the
        # commit instant is what the gates bound
        g = grad(k, x)
        if not math.isfinite(g):
            raise EngineAbort(f"non-finite partial gradient at coordinate {k}")
        return g

    def commit(ticket: int, snap: int, k: int, g: float) -> int:
        with cond:
            while not shared.commit_ok(ticket):
                if shared.failure is not None:
                    raise EngineAbort("peer worker failed")
                cond.wait()
            xk = float(x[k])           # re-read the target cell at commit
            d, _ = prox(codes[k], g, xk, gamma, p1[k], p2[k])
            if not math.isfinite(d):
                raise EngineAbort(f"non-finite displacement at coordinate {k}")
            x[k] = xk + d
            shared.committed += 1
            t = shared.committed
            shared.last_commit[k] = t
            del shared.inflight[ticket]
            if cfg.round_enforcement and cfg.schedule == SCHEDULE_PARTITIONED:
                # three counters with rotating roles: the current one counts
                # coordinates touched this round, the next is primed at 0,
                # and the one after is cleared by every commit of this round
                shared.round_counters[(shared.round_idx + 2) % 3] = 0
                if shared.last_round[k] < shared.round_idx:
                    shared.last_round[k] = shared.round_idx
                    cur = shared.round_idx % 3
                    shared.round_counters[cur] += 1
                    if shared.round_counters[cur] == problem.n:
                        shared.round_idx += 1
            cond.notify_all()
        ns = 0 if serialized else time.monotonic_ns()
        buffer.append((t, k, d, g, snap, ns))
        return t

    return begin, compute, commit


def pacd_run(problem: CompositeProblem, gamma: float, config: AsyncConfig,
             x0: np.ndarray | None = None) -> Trace:
    """Worst-case parallel engine: coordinates partitioned near-evenly,
    each worker cycling over its block; no per-cell locks are needed since
    every coordinate has a unique owner."""
    if config.schedule != SCHEDULE_PARTITIONED:
        raise InvalidParameterError("pacd_run requires the partitioned-cyclic schedule")
    n = problem.n
    blocks = np.array_split(np.arange(n), config.workers)
    k_stop = config.r // (2 * n) if config.round_enforcement else 0

    def factory(w, shared, x, buffer, serialized):
        my = [int(c) for c in blocks[w]]

        def run():
            begin, compute, commit = _make_update_fns(
                problem, gamma, shared, x, buffer, serialized)
            cond = shared.cond
            try:
                for rnd in range(config.pseudo_rounds):
                    if config.round_enforcement:
                        with cond:
                            while shared.round_idx < rnd:
                                if shared.failure is not None:
                                    raise EngineAbort("peer worker failed")
                                cond.wait()
                    passes = k_stop if config.round_enforcement else 1
                    for _ in range(passes):
                        for k in my:
                            ticket, snap = begin()
                            g = compute(k)
                            commit(ticket, snap, k, g)
            except BaseException as exc:  # noqa: BLE001 - propagated via trace
                shared.fail(exc)

        return run

    return _parallel_run(problem, gamma, config, x0, factory)


def sacd_run(problem: CompositeProblem, gamma: float, config: AsyncConfig,
             x0: np.ndarray | None = None) -> Trace:
    """Stochastic asynchronous engine: exactly t_bar uniform selections from
    per-worker seeded streams, all committed."""
    import random
    if config.schedule != SCHEDULE_UNIFORM:
        raise InvalidParameterError("sacd_run requires the uniform-random schedule")
    n = problem.n

    def factory(w, shared, x, buffer, serialized):
        rng = random.Random(worker_stream_seed(config.seed, w))

        def run():
            begin, compute, commit = _make_update_fns(
                problem, gamma, shared, x, buffer, serialized)
            cond = shared.cond
            try:
                while True:
                    with cond:
                        while not shared.admission_ok():
                            if shared.failure is not None:
                                raise EngineAbort("peer worker failed")
                            cond.wait()
                        if shared.selections >= config.t_bar:
                            return
                        shared.selections += 1
                        ticket = shared.started
                        shared.started += 1
                        snap = shared.committed
                        shared.inflight[ticket] = snap
                    k = rng.randrange(n)
                    g = compute(k)
                    commit(ticket, snap, k, g)
            except BaseException as exc:  # noqa: BLE001
                shared.fail(exc)

        return run

    return _parallel_run(problem, gamma, config, x0, factory)


@dataclass
class WindowAudit:
    """Per-coordinate update-frequency audit of a trace."""

    r: int
    block_counts: list[tuple[int, int]] = field(default_factory=list)
    blocks_ok: bool = True          # every aligned r-block count in [1, kappa]
    sliding_min_ok: bool = True     # every sliding r-window sees each coord
    max_gap: int = 0
    kappa_max: int | None = None


def measure_interference(trace: Trace, r: int | None = None,
                         kappa_max: int | None = None) -> tuple[int, WindowAudit]:
    """q_observed plus the update-frequency audit.

    q_observed is the maximum over updates of (t - 1 - snapshot). The audit
    counts per-coordinate updates in consecutive aligned blocks of r commits
    (the unit for which the pseudo-round protocol guarantees [1, kappa_max])
    and checks the sliding-window at-least-once property via the largest gap
    between consecutive updates of any coordinate.
    """
    if len(trace) == 0:
        raise InvalidParameterError("trace is empty")
    q_obs = int(trace.interference.max())
    cfg = trace.config
    if r is None:
        r = cfg.r if cfg is not None and cfg.r else len(trace)
    if kappa_max is None and cfg is not None:
        kappa_max = cfg.kappa_max
    n = trace.x0.size
    audit = WindowAudit(r=r, kappa_max=kappa_max)

    t_total = len(trace)
    for lo in range(0, t_total - r + 1, r):
        counts = np.bincount(trace.k[lo:lo + r], minlength=n)
        lo_c, hi_c = int(counts.min()), int(counts.max())
        audit.block_counts.append((lo_c, hi_c))
        if lo_c < 1 or (kappa_max is not None and hi_c > kappa_max):
            audit.blocks_ok = False

    # largest gap between consecutive updates of one coordinate, counting
    # the start and end of the trace as boundaries
    last_seen = np.zeros(n, dtype=np.int64)
    max_gap = 0
    for i in range(t_total):
        k = trace.k[i]
        gap = i + 1 - last_seen[k]
        if gap > max_gap:
            max_gap = gap
        last_seen[k] = i + 1
    tail = int((t_total - last_seen).max()) + 1
    audit.max_gap = max(max_gap, tail)
    audit.sliding_min_ok = audit.max_gap <= r
    return q_obs, audit

"""Non-equilibrium trajectories and Jarzynski free-energy estimates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .dynamics import Stream, cold_start, sw_kernel
from .lattice import Direction, EdgeLinks, ReplicaLattice
from .schedule import Protocol, Schedule, ScheduleError, WorkRecord

DEFAULT_THERM = 1000


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class JarzynskiEstimate:
    log_ratio: float  # log(Z_final / Z_initial)
    stat_err: float
    n_traj: int
    N: int
    direction: Direction

    def flipped(self) -> "JarzynskiEstimate":
        other = Direction.REVERSE if self.direction is Direction.DIRECT else Direction.DIRECT
        return JarzynskiEstimate(-self.log_ratio, self.stat_err, self.n_traj, self.N, other)


@nb.njit(cache=True, nogil=True)
def _set_edge(p_act, n_static, lam_row, beta):
    P = lam_row.size
    for j in range(P):
        p_act[n_static + j] = -math.expm1(-2.0 * beta * (1.0 - lam_row[j]))
        p_act[n_static + P + j] = -math.expm1(-2.0 * beta * lam_row[j])


@nb.njit(cache=True, nogil=True)
def _trajectory_kernel(spins, link_a, link_b, p_act, n_static, lower, intra, inter, lam, beta,
                       therm, sweeps, key, ctr, parent, trace):
    P = lower.size
    N = lam.shape[0] - 1
    _set_edge(p_act, n_static, lam[0], beta)
    for _ in range(therm):
        ctr = sw_kernel(spins, link_a, link_b, p_act, key, ctr, parent)
    W = 0.0
    for m in range(N):
        dw = 0.0
        changed = False
        for j in range(P):
            d = lam[m + 1, j] - lam[m, j]
            if d != 0.0:
                changed = True
                s = spins[lower[j]]
                dw += d * (s * spins[intra[j]] - s * spins[inter[j]])
        dw *= beta
        W += dw
        if trace.size > 0:
            trace[m] = dw
        if changed:
            _set_edge(p_act, n_static, lam[m + 1], beta)
        for _ in range(sweeps):
            ctr = sw_kernel(spins, link_a, link_b, p_act, key, ctr, parent)
    return W, ctr


class _Prepared:
    """Per-(lattice, schedule) arrays shared read-only by all trajectories."""

    def __init__(self, lat: ReplicaLattice, schedule: Schedule):
        if abs(schedule.beta - lat.spec.beta) > 1e-15 * max(1.0, lat.spec.beta):
            raise ScheduleError("schedule beta differs from the lattice beta")
        self.lat = lat
        self.schedule = schedule
        self.edge: EdgeLinks = lat.edge_links(schedule.direction)
        self.link_a, self.link_b, self.n_static = lat.working_links(self.edge)
        self.lam = np.ascontiguousarray(schedule.pair_lambdas(self.edge))
        beta = lat.spec.beta
        self.p_static = np.empty(self.link_a.size)
        self.p_static[: self.n_static] = -math.expm1(-2.0 * beta)

    def run(self, seed: tuple[int, ...], therm: int, sweeps: int, keep_trace: bool) -> WorkRecord:
        stream = Stream.from_seed(*seed)
        spins = cold_start(self.lat.n_sites)
        parent = np.empty(spins.size, dtype=np.int64)
        p_act = self.p_static.copy()
        trace = np.empty(self.schedule.N if keep_trace else 0)
        W, _ = _trajectory_kernel(
            spins, self.link_a, self.link_b, p_act, self.n_static, self.edge.lower,
            self.edge.intra_upper, self.edge.inter_upper, self.lam, float(self.lat.spec.beta),
            int(therm), int(sweeps), np.uint64(stream.key), np.uint64(0), parent, trace)
        return WorkRecord(float(W), tuple(seed), self.schedule.direction,
                          trace if keep_trace else None, N=self.schedule.N,
                          protocol=self.schedule.protocol)


def run_trajectory(lat: ReplicaLattice, schedule: Schedule, seed, therm_sweeps: int = DEFAULT_THERM,
                   sweeps_per_step: int = 1, keep_trace: bool = False) -> WorkRecord:
    """Thermalize at ``lambda_0``, then alternate work increments and updates.

    ``seed`` is an int or a tuple ``(seed, *spawn_key)`` naming the stream.
    """
    if therm_sweeps < 0 or sweeps_per_step < 1:
        raise ValueError("need therm_sweeps >= 0 and sweeps_per_step >= 1")
    seed = (int(seed),) if np.isscalar(seed) else tuple(int(s) for s in seed)
    return _Prepared(lat, schedule).run(seed, therm_sweeps, sweeps_per_step, keep_trace)


def run_ensemble(lat: ReplicaLattice, schedule: Schedule, n_traj: int, seed, *,
                 therm_sweeps: int = DEFAULT_THERM, sweeps_per_step: int = 1,
                 workers: int = 1, keep_trace: bool = False) -> list[WorkRecord]:
    """Run ``n_traj`` independent trajectories; trajectory ``i`` uses stream ``(*seed, i)``.

    The returned list is ordered by trajectory index whatever ``workers`` is.
    """
    base = (int(seed),) if np.isscalar(seed) else tuple(int(s) for s in seed)
    prep = _Prepared(lat, schedule)
    seeds = [base + (i,) for i in range(n_traj)]

    def one(s):
        return prep.run(s, therm_sweeps, sweeps_per_step, keep_trace)

    if workers <= 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


def log_mean_exp(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    shift = x.max()
    return float(shift + np.log(np.mean(np.exp(x - shift))))


def _leave_one_out_lme(x: np.ndarray) -> np.ndarray:
    """``log mean exp`` of ``x`` with each element left out in turn.

    Built from prefix/suffix log-sum-exp so a dominant sample does not cause
    cancellation.
    """
    n = x.size
    pre = np.logaddexp.accumulate(x)
    suf = np.logaddexp.accumulate(x[::-1])[::-1]
    loo = np.empty(n)
    loo[0] = suf[1]
    loo[-1] = pre[-2]
    if n > 2:
        loo[1:-1] = np.logaddexp(pre[:-2], suf[2:])
    return loo - math.log(n - 1)


def estimate_log_ratio(records: list[WorkRecord]) -> JarzynskiEstimate:
    """``log <exp(-W)>`` with a delete-1 jackknife error."""
    if len(records) < 2:
        raise InsufficientSamplesError(f"need at least 2 work records, got {len(records)}")
    directions = {r.direction for r in records}
    if len(directions) != 1:
        raise ValueError("work records mix directions")
    if len({r.N for r in records}) != 1:
        raise ValueError("work records come from different schedules")
    W = np.array([r.W for r in records], dtype=float)
    return _estimate_from_work(W, records[0].N, records[0].direction)


def _estimate_from_work(W: np.ndarray, N: int, direction: Direction) -> JarzynskiEstimate:
    n = W.size
    value = log_mean_exp(-W)
    # Jensen: log<exp(-W)> >= -<W>
    assert value >= -W.mean() - 1e-12 * max(1.0, np.abs(W).max()), "Jensen bound violated"
    loo = _leave_one_out_lme(-W)
    err = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return JarzynskiEstimate(value, err, n, int(N), Direction.parse(direction))


@dataclass(frozen=True)
class ConsistencyReport:
    difference: float  # direct + reverse log ratios, zero in expectation
    sigma: float
    pull: float
    flagged: bool
    combined: JarzynskiEstimate  # weighted mean, expressed in the direct orientation


def combine(direct: JarzynskiEstimate, reverse: JarzynskiEstimate) -> JarzynskiEstimate:
    """Inverse-variance weighted mean of ``direct`` and the negated ``reverse``."""
    a, b = direct.log_ratio, -reverse.log_ratio
    sa, sb = direct.stat_err, reverse.stat_err
    if sa == 0.0 or sb == 0.0:
        if sa == 0.0 and sb == 0.0:
            value, err = 0.5 * (a + b), 0.0
        else:
            value, err = (a, 0.0) if sa == 0.0 else (b, 0.0)
    else:
        wa, wb = sa ** -2, sb ** -2
        value = (wa * a + wb * b) / (wa + wb)
        err = (wa + wb) ** -0.5
    return JarzynskiEstimate(value, err, direct.n_traj + reverse.n_traj, direct.N, Direction.DIRECT)


def direct_reverse_check(direct: JarzynskiEstimate, reverse: JarzynskiEstimate,
                         threshold: float = 3.0) -> ConsistencyReport:
    d = direct.log_ratio + reverse.log_ratio
    sigma = math.hypot(direct.stat_err, reverse.stat_err)
    if sigma > 0:
        pull = d / sigma
    else:
        pull = 0.0 if d == 0 else math.copysign(math.inf, d)
    return ConsistencyReport(d, sigma, pull, abs(pull) > threshold, combine(direct, reverse))


def staged_schedules(beta: float, N: int, L: int, direction: Direction | str) -> list[Schedule]:
    """Protocol-2 stages as separate schedules, each starting from equilibrium.

    Summing the per-stage log ratios gives the full ratio; unlike the single
    staged trajectory every stage starts from a thermalized configuration.
    """
    direction = Direction.parse(direction)
    if N % L:
        raise ScheduleError(f"N={N} is not divisible by L={L}")
    m = N // L
    ramp = np.arange(m + 1) / m
    out = []
    for j in range(L):
        lam = np.zeros((m + 1, L))
        lam[:, :j] = 1.0
        lam[:, j] = ramp
        if direction is Direction.REVERSE:
            lam = 1.0 - lam
        out.append(Schedule(float(beta), m, Protocol.P2, direction, lam, stage_length=m,
                            stage_order=tuple(range(L))))
    return out


def estimate_staged(lat: ReplicaLattice, N: int, direction: Direction | str, n_traj: int, seed, *,
                    therm_sweeps: int = DEFAULT_THERM, workers: int = 1) -> JarzynskiEstimate:
    """Protocol 2 with an equilibrium start for every stage (sum of stage estimates)."""
    base = (int(seed),) if np.isscalar(seed) else tuple(int(s) for s in seed)
    total, var = 0.0, 0.0
    stages = staged_schedules(lat.spec.beta, N, lat.spec.surface_sites, direction)
    for j, sched in enumerate(stages):
        recs = run_ensemble(lat, sched, n_traj, base + (10_000 + j,), therm_sweeps=therm_sweeps,
                            workers=workers)
        est = estimate_log_ratio(recs)
        total += est.log_ratio
        var += est.stat_err ** 2
    return JarzynskiEstimate(total, math.sqrt(var), n_traj, N, Direction.parse(direction))

"""Coupling protocols interpolating ``Z_n(l)`` and ``Z_n(l +- 1)``.

A schedule only describes the ramp parameter ``lambda`` of each subset of
edge pairs at every step.  Bound to an :class:`~renyi_mc.lattice.EdgeLinks`,
pair ``j`` carries the couplings ``beta * (1 - lambda)`` on its intra link
and ``beta * lambda`` on its inter link.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .lattice import Direction, EdgeLinks


class Protocol(str, enum.Enum):
    P1 = "P1"  # all edge couplings ramp together
    P2 = "P2"  # one surface subset at a time


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    beta: float
    N: int
    protocol: Protocol
    direction: Direction
    lam: np.ndarray  # shape (N + 1, n_subsets)
    stage_length: int | None = None
    stage_order: tuple[int, ...] | None = None

    @property
    def n_subsets(self) -> int:
        return int(self.lam.shape[1])

    def pair_lambdas(self, edge: EdgeLinks) -> np.ndarray:
        """Per-pair ramp table, shape ``(N + 1, n_pairs)``."""
        if edge.n_subsets != self.n_subsets:
            raise ScheduleError(
                f"schedule has {self.n_subsets} subsets, edge has {edge.n_subsets}")
        if edge.direction is not self.direction:
            raise ScheduleError("schedule and edge links disagree on the direction")
        return self.lam[:, edge.subset]

    def edge_couplings(self, m: int, edge: EdgeLinks) -> tuple[np.ndarray, np.ndarray]:
        lam = self.pair_lambdas(edge)[m]
        return self.beta * (1.0 - lam), self.beta * lam


@dataclass
class WorkRecord:
    W: float
    seed: tuple[int, ...]
    direction: Direction
    steps: np.ndarray | None = field(default=None, repr=False)
    N: int | None = None
    protocol: Protocol | None = None


def _orient(lam: np.ndarray, direction: Direction) -> np.ndarray:
    return lam if direction is Direction.DIRECT else 1.0 - lam


def protocol1_schedule(beta: float, N: int, direction: Direction | str = Direction.DIRECT,
                       n_subsets: int = 1) -> Schedule:
    """Linear ramp of every edge coupling: ``lambda_m = m / N``."""
    direction = Direction.parse(direction)
    if N < 1:
        raise ScheduleError(f"N must be >= 1, got {N}")
    ramp = np.arange(N + 1, dtype=float) / N
    lam = np.repeat(ramp[:, None], n_subsets, axis=1)
    return Schedule(float(beta), int(N), Protocol.P1, direction, _orient(lam, direction))


def protocol2_schedule(beta: float, N: int, L: int, direction: Direction | str = Direction.DIRECT,
                       stage_order=None) -> Schedule:
    """Staged ramp: the ``L`` surface subsets ramp one after another.

    Subset ``stage_order[j]`` ramps linearly during steps
    ``[j*m, (j+1)*m)`` with ``m = N / L`` and is frozen otherwise.
    """
    direction = Direction.parse(direction)
    if L < 1 or N < 1:
        raise ScheduleError(f"need N >= 1 and L >= 1, got N={N}, L={L}")
    if N % L:
        raise ScheduleError(f"N={N} is not divisible by L={L}")
    order = tuple(range(L)) if stage_order is None else tuple(int(s) for s in stage_order)
    if sorted(order) != list(range(L)):
        raise ScheduleError(f"stage_order must be a permutation of range({L})")
    m = N // L
    steps = np.arange(N + 1)
    lam = np.empty((N + 1, L))
    for stage, subset in enumerate(order):
        lam[:, subset] = np.clip((steps - stage * m) / m, 0.0, 1.0)
    return Schedule(float(beta), int(N), Protocol.P2, direction, _orient(lam, direction),
                    stage_length=m, stage_order=order)


def make_schedule(protocol: Protocol | str, beta: float, N: int, direction, n_subsets: int,
                  stage_order=None) -> Schedule:
    protocol = Protocol(protocol)
    if protocol is Protocol.P1:
        return protocol1_schedule(beta, N, direction, n_subsets)
    return protocol2_schedule(beta, N, n_subsets, direction, stage_order)


def step_work(config: np.ndarray, edge: EdgeLinks, schedule: Schedule, m: int) -> float:
    """Work of step ``m``: ``H_{m+1}/T - H_m/T`` on the frozen ``config``.

    Only the edge pairs change, so
    ``dW = beta * sum_pairs dlambda * (s_a s_intra - s_a s_inter)``.
    """
    if not 0 <= m < schedule.N:
        raise IndexError(f"step {m} outside [0, {schedule.N})")
    lam = schedule.pair_lambdas(edge)
    dlam = lam[m + 1] - lam[m]
    s = config.astype(np.int64)
    intra = s[edge.lower] * s[edge.intra_upper]
    inter = s[edge.lower] * s[edge.inter_upper]
    return float(schedule.beta * np.dot(dlam, intra - inter))

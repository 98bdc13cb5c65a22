import numpy as np
import pytest
from hypothesis import given, strategies as st

from renyi_mc.dynamics import Couplings, reduced_energy
from renyi_mc.lattice import CutSpec, Direction, EdgeLinks, LatticeSpec, build_replica_lattice
from renyi_mc.schedule import (Protocol, ScheduleError, make_schedule, protocol1_schedule,
                               protocol2_schedule, step_work)


def test_p1_ramps():
    assert np.array_equal(protocol1_schedule(0.4, 2, "grow").lam[:, 0], [0, 0.5, 1])
    assert np.array_equal(protocol1_schedule(0.4, 2, "shrink").lam[:, 0], [1, 0.5, 0])
    assert np.array_equal(protocol1_schedule(0.4, 1).lam[:, 0], [0, 1])


def test_p2_two_stages():
    s = protocol2_schedule(0.3, 4, 2, "direct")
    assert np.array_equal(s.lam[:, 0], [0, 0.5, 1, 1, 1])
    assert np.array_equal(s.lam[:, 1], [0, 0, 0, 0.5, 1])
    assert s.stage_length == 2


def test_p2_paper_stage_length():
    assert protocol2_schedule(0.22, 24_000, 24).stage_length == 1000


def test_p2_errors():
    with pytest.raises(ScheduleError):
        protocol2_schedule(0.3, 10, 3)
    with pytest.raises(ScheduleError):
        protocol2_schedule(0.3, 6, 3, stage_order=[0, 0, 1])


@given(st.integers(1, 6), st.integers(1, 8), st.sampled_from(["direct", "reverse"]))
def test_p2_invariants(L, m, d):
    s = protocol2_schedule(0.3, L * m, L, d)
    dl = np.diff(s.lam, axis=0)
    assert np.all(np.abs(dl.sum(axis=0)) == pytest.approx(1.0))
    # at most one subset moves per step, and stages partition the steps
    assert np.all(np.count_nonzero(dl, axis=1) == 1)
    grow = s.lam if d == "direct" else 1 - s.lam
    assert np.all(np.diff(grow, axis=0) >= 0)
    assert np.all(grow[0] == 0) and np.all(grow[-1] == 1)


def edge_case(l=1, beta=0.44):
    lat = build_replica_lattice(LatticeSpec(2, 4, 4, 2, beta), CutSpec(l))
    return lat, lat.edge_links("direct")


def test_step_work_example():
    # one varied pair: lower site 0, intra partner 1, inter partner 2
    e = EdgeLinks(0, Direction.DIRECT, np.array([0]), np.array([1]), np.array([2]), np.array([0]), 1)
    s = protocol1_schedule(0.44, 100, "direct")
    cfg = np.array([1, 1, -1], dtype=np.int8)
    assert step_work(cfg, e, s, 0) == pytest.approx(0.0088, rel=1e-12)


def test_step_work_zero_when_symmetric():
    lat, e = edge_case()
    cfg = np.ones(lat.n_sites, dtype=np.int8)
    cfg[np.arange(0, lat.n_sites, 3)] = -1
    cfg[e.lower] = 1
    cfg[e.intra_upper] = cfg[e.inter_upper] = -1
    assert step_work(cfg, e, protocol1_schedule(0.44, 10), 3) == 0.0


def test_step_work_zero_when_frozen():
    lat, e = edge_case()
    base = protocol1_schedule(0.44, 4)
    lam = np.repeat(base.lam, 2, axis=0)  # every ramp value held for one extra step
    s = type(base)(0.44, lam.shape[0] - 1, base.protocol, base.direction, lam)
    cfg = np.random.default_rng(0).choice(np.array([-1, 1], dtype=np.int8), lat.n_sites)
    works = [step_work(cfg, e, s, m) for m in range(s.N)]
    assert all(w == 0.0 for w in works[::2])
    assert sum(works) == pytest.approx(sum(step_work(cfg, e, base, m) for m in range(4)))


def test_step_work_index_error():
    lat, e = edge_case()
    with pytest.raises(IndexError):
        step_work(np.ones(lat.n_sites, dtype=np.int8), e, protocol1_schedule(0.44, 4), 4)


def hamiltonian_at(lat, e, s, m):
    a, b, n_static = lat.working_links(e)
    lam = s.pair_lambdas(e)[m]
    beta = np.concatenate([np.full(n_static, s.beta), s.beta * (1 - lam), s.beta * lam])
    return Couplings(a, b, beta, lat.n_sites)


@given(st.integers(0, 2**31), st.sampled_from([Protocol.P1, Protocol.P2]),
       st.sampled_from(list(Direction)), st.integers(1, 2))
def test_work_telescopes(seed, proto, d, l):
    lat = build_replica_lattice(LatticeSpec(3, 3, 3, 2, 0.3), CutSpec(l))
    e = lat.edge_links(d)
    s = make_schedule(proto, 0.3, 6, d, e.n_subsets)
    cfg = np.random.default_rng(seed).choice(np.array([-1, 1], dtype=np.int8), lat.n_sites)
    total = sum(step_work(cfg, e, s, m) for m in range(s.N))
    dH = reduced_energy(cfg, hamiltonian_at(lat, e, s, s.N)) - reduced_energy(cfg, hamiltonian_at(lat, e, s, 0))
    assert total == pytest.approx(dH, abs=1e-12)


@given(st.integers(0, 2**31))
def test_reversed_ramp_negates_work(seed):
    lat, e = edge_case(1)
    fwd = protocol1_schedule(0.44, 7, "direct")
    rev = type(fwd)(fwd.beta, fwd.N, fwd.protocol, fwd.direction, fwd.lam[::-1].copy())
    cfg = np.random.default_rng(seed).choice(np.array([-1, 1], dtype=np.int8), lat.n_sites)
    for m in range(7):
        assert step_work(cfg, e, rev, 6 - m) == pytest.approx(-step_work(cfg, e, fwd, m))


def test_schedule_edge_mismatch():
    lat, e = edge_case()
    with pytest.raises(ScheduleError):
        protocol1_schedule(0.44, 3, "reverse").pair_lambdas(e)
    with pytest.raises(ScheduleError):
        protocol1_schedule(0.44, 3, "direct", n_subsets=2).pair_lambdas(e)

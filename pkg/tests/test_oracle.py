import json
import math

import numpy as np
import pytest

from renyi_mc.dynamics import Couplings
from renyi_mc.lattice import CutSpec, LatticeSpec, build_replica_lattice
from renyi_mc.oracle import (GOLDEN_DIR, BudgetExceededError, OracleBudget, check_golden,
                             exact_log_ratio, exact_log_z, exact_renyi, single_replica_couplings,
                             write_golden)


def brute_log_z(c: Couplings) -> float:
    n = c.n_sites
    states = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1) * 2 - 1
    E = -(states[:, c.link_a] * states[:, c.link_b]) @ c.beta
    m = (-E).max()
    return float(m + np.log(np.exp(-E - m).sum()))


def test_two_spins():
    c = Couplings(np.array([0]), np.array([1]), np.array([0.7]), 2)
    assert exact_log_z(c) == pytest.approx(math.log(4 * math.cosh(0.7)), rel=1e-14)


def test_free_spins():
    spec = LatticeSpec(2, 3, 2, 2, 0.0)
    lat = build_replica_lattice(spec, CutSpec(2))
    assert exact_log_z(lat) == pytest.approx(lat.n_sites * math.log(2), rel=1e-14)


def test_matches_vectorised_enumeration():
    spec = LatticeSpec(2, 2, 3, 2, 0.41)
    lat = build_replica_lattice(spec, CutSpec(1))
    c = Couplings.from_lattice(lat)
    assert exact_log_z(lat) == pytest.approx(brute_log_z(c), rel=1e-13)


def test_decoupled_replicas_factorize(bench_spec):
    lat = build_replica_lattice(bench_spec, CutSpec(0))
    assert exact_log_z(lat) == pytest.approx(2 * exact_log_z(single_replica_couplings(bench_spec)),
                                             rel=1e-13)
    assert abs(exact_renyi(bench_spec, 0)) < 1e-12


def test_small_beta_entropy_vanishes():
    spec = LatticeSpec(2, 3, 3, 2, 1e-4)
    assert all(abs(exact_renyi(spec, l)) < 1e-6 for l in range(4))


def test_ratio_antisymmetry(bench_spec):
    assert exact_log_ratio(bench_spec, 1, 1) == 0.0
    assert exact_log_ratio(bench_spec, 1, 2) == pytest.approx(-exact_log_ratio(bench_spec, 2, 1))


def test_flip_and_shard_invariance(bench_spec):
    lat = build_replica_lattice(bench_spec, CutSpec(2))
    ref = exact_log_z(lat)
    assert exact_log_z(lat, initial=-1) == pytest.approx(ref, rel=1e-14)
    assert exact_log_z(lat, shard_bits=3) == pytest.approx(ref, rel=1e-14)


def test_budget():
    spec = LatticeSpec(2, 4, 4, 2, 0.3)
    with pytest.raises(BudgetExceededError):
        exact_log_z(build_replica_lattice(spec, CutSpec(1)))
    with pytest.raises(BudgetExceededError):
        exact_log_z(single_replica_couplings(LatticeSpec(2, 3, 4, 1, 0.3)), OracleBudget(max_spins=8))


def test_mirror_symmetry_approached_with_longer_time():
    """S(l) - S(L-l) shrinks as Ltau/L grows (zero-temperature limit)."""
    gaps = []
    for Ltau in (2, 3, 4):
        spec = LatticeSpec(2, 3, Ltau, 2, 0.44)
        gaps.append(abs(exact_renyi(spec, 1) - exact_renyi(spec, 2)))
    assert gaps[0] > gaps[1] > gaps[2]


def test_shipped_golden_file_reproduces():
    files = sorted(GOLDEN_DIR.glob("*.json"))
    assert files
    data = json.loads(files[0].read_text())
    assert data["spec"] == {"D": 2, "L": 3, "Ltau": 4, "n_replicas": 2, "beta": 0.44}
    assert check_golden(files[0]) == []


def test_tampered_golden_is_caught(tmp_path, bench_spec):
    path = tmp_path / "g.json"
    write_golden(path, bench_spec)
    data = json.loads(path.read_text())
    data["entries"][1]["S"] += 1e-9
    path.write_text(json.dumps(data))
    problems = check_golden(path)
    assert len(problems) == 1 and "l=1 S" in problems[0]

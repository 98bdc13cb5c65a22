"""Exact partition functions and Renyi entropies by brute-force enumeration.

Configurations are visited in Gray-code order so every step flips one spin
and the energy is updated from that spin's local field.  The space can be
split into shards by fixing the highest-index spins; shard sums are reduced
in a fixed order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numba as nb
import numpy as np

from .dynamics import Couplings, neighbour_table
from .lattice import CutSpec, LatticeSpec, ReplicaLattice, build_replica_lattice, single_replica_links

DEFAULT_MAX_SPINS = 24


class BudgetExceededError(ValueError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_spins: int = DEFAULT_MAX_SPINS

    def check(self, n_spins: int):
        if n_spins > self.max_spins:
            raise BudgetExceededError(
                f"{n_spins} spins exceed the enumeration budget of {self.max_spins}")


@nb.njit(cache=True)
def _energy(link_a, link_b, beta, spins):
    e = 0.0
    for k in range(link_a.size):
        e -= beta[k] * spins[link_a[k]] * spins[link_b[k]]
    return e


@nb.njit(cache=True)
def _shard_sums(ptr, nbr, w, link_a, link_b, beta, spins, n_free, shift, block_bits):
    """Block sums of exp(-H/T - shift) over the 2**n_free settings of spins[:n_free].

    ``spins`` holds the starting configuration (fixed high spins included).
    The energy is recomputed from scratch at every block boundary to stop
    incremental rounding from drifting.
    """
    n_states = 1 << n_free
    block = 1 << min(block_bits, n_free)
    out = np.zeros(n_states // block)
    e = _energy(link_a, link_b, beta, spins)
    acc = math.exp(-e - shift)
    for i in range(1, n_states):
        if i % block == 0:
            out[i // block - 1] = acc
            acc = 0.0
        # Gray code: step i flips the lowest set bit of i
        j = 0
        v = i
        while (v & 1) == 0:
            v >>= 1
            j += 1
        spins[j] = -spins[j]
        if (i + 1) % block == 0 or i % block == 0:
            e = _energy(link_a, link_b, beta, spins)
        else:
            h = 0.0
            for q in range(ptr[j], ptr[j + 1]):
                h += w[q] * spins[nbr[q]]
            e -= 2.0 * spins[j] * h
        acc += math.exp(-e - shift)
    out[out.size - 1] = acc
    return out


def _as_couplings(system) -> Couplings:
    if isinstance(system, Couplings):
        return system
    if isinstance(system, ReplicaLattice):
        return Couplings.from_lattice(system)
    raise TypeError(f"cannot enumerate {type(system).__name__}")


def exact_log_z(system, budget: OracleBudget = OracleBudget(), *, shard_bits: int = 0,
                initial: int = 1) -> float:
    """``log Z`` of a :class:`ReplicaLattice` or :class:`Couplings`, exactly.

    ``initial`` (+1 or -1) is the spin value the enumeration starts from;
    by the global flip symmetry the result does not depend on it.
    """
    c = _as_couplings(system)
    n = c.n_sites
    budget.check(n)
    if initial not in (1, -1):
        raise ValueError("initial must be +1 or -1")
    shard_bits = min(shard_bits, n)
    n_free = n - shard_bits
    ptr, nbr, w = neighbour_table(c)
    # largest possible -H/T, so every exponent is <= 0
    shift = float(np.sum(np.abs(c.beta)))
    parts = []
    for shard in range(1 << shard_bits):
        spins = np.full(n, initial, dtype=np.float64)
        for bit in range(shard_bits):
            if (shard >> bit) & 1:
                spins[n_free + bit] = -initial
        parts.extend(_shard_sums(ptr, nbr, w, c.link_a, c.link_b, c.beta, spins, n_free, shift, 12))
    return shift + math.log(math.fsum(parts))


def single_replica_couplings(spec: LatticeSpec) -> Couplings:
    a, b = single_replica_links(spec)
    return Couplings(a, b, np.full(a.size, float(spec.beta)), spec.sites_per_replica)


def _replica_spec(spec: LatticeSpec, n: int | None) -> LatticeSpec:
    n = spec.n_replicas if n is None else n
    return LatticeSpec(spec.D, spec.L, spec.Ltau, n, spec.beta)


def exact_renyi(spec: LatticeSpec, l: int, n: int | None = None,
                budget: OracleBudget = OracleBudget()) -> float:
    """``S_n = (log Z_n(l) - n log Z) / (1 - n)``."""
    rs = _replica_spec(spec, n)
    log_zn = exact_log_z(build_replica_lattice(rs, CutSpec(l)), budget)
    log_z1 = exact_log_z(single_replica_couplings(rs), budget)
    return (log_zn - rs.n_replicas * log_z1) / (1 - rs.n_replicas)


def exact_log_ratio(spec: LatticeSpec, l_from: int, l_to: int, n: int | None = None,
                    budget: OracleBudget = OracleBudget()) -> float:
    """``log(Z_n(l_to) / Z_n(l_from))``."""
    if l_from == l_to:
        return 0.0
    rs = _replica_spec(spec, n)
    return (exact_log_z(build_replica_lattice(rs, CutSpec(l_to)), budget)
            - exact_log_z(build_replica_lattice(rs, CutSpec(l_from)), budget))


# golden files -------------------------------------------------------------

GOLDEN_DIR = Path(__file__).parent / "data"


def golden_values(spec: LatticeSpec, budget: OracleBudget = OracleBudget()) -> dict:
    log_z1 = exact_log_z(single_replica_couplings(spec), budget)
    n = spec.n_replicas
    entries = []
    for l in range(spec.L + 1):
        log_zn = exact_log_z(build_replica_lattice(spec, CutSpec(l)), budget)
        entries.append({"l": l, "log_zn": log_zn, "S": (log_zn - n * log_z1) / (1 - n)})
    return {"spec": asdict(spec), "log_z_single": log_z1, "entries": entries}


def write_golden(path: str | Path, spec: LatticeSpec) -> dict:
    data = golden_values(spec)
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
    return data


def check_golden(path: str | Path, rtol: float = 1e-12) -> list[str]:
    """Regenerate a golden file's values and list every mismatch."""
    stored = json.loads(Path(path).read_text())
    spec = LatticeSpec(**stored["spec"])
    fresh = golden_values(spec)
    problems = []

    def cmp(label, a, b):
        if not math.isclose(a, b, rel_tol=rtol, abs_tol=rtol):
            problems.append(f"{label}: stored {a!r}, recomputed {b!r}")

    cmp("log_z_single", stored["log_z_single"], fresh["log_z_single"])
    if len(stored["entries"]) != len(fresh["entries"]):
        problems.append("entry count differs")
    for s, f in zip(stored["entries"], fresh["entries"]):
        cmp(f"l={f['l']} log_zn", s["log_zn"], f["log_zn"])
        cmp(f"l={f['l']} S", s["S"], f["S"])
    return problems

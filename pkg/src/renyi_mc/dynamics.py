"""Equilibrium updates under arbitrary non-negative per-link couplings.

Random numbers come from a counter-based stream: draw number ``c`` of the
stream with key ``k`` is the SplitMix64 finaliser applied to
``k + (c + 1) * golden``.  Each update consumes a fixed block of counters
(one per link, then one per site), so the result of an update depends only
on ``(key, counter)`` and never on which worker ran it or in which order.
Keys are derived with :class:`numpy.random.SeedSequence`, so streams for
different ``(seed, *spawn_key)`` are independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@nb.njit(inline="always")
def uniform(key, ctr):
    z = key + (ctr + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * _TO_UNIT


@dataclass
class Stream:
    """A seekable random stream: a 64-bit key and a running counter."""

    key: np.uint64
    counter: int = 0

    @classmethod
    def from_seed(cls, seed: int, *spawn_key: int) -> "Stream":
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in spawn_key))
        return cls(ss.generate_state(1, dtype=np.uint64)[0])

    def uniforms(self, size: int) -> np.ndarray:
        out = _uniforms(self.key, np.uint64(self.counter), size)
        self.counter += size
        return out


@nb.njit(cache=True)
def _uniforms(key, ctr, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = uniform(key, ctr + np.uint64(i))
    return out


class SizeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Couplings:
    """A coupling assignment: link endpoints plus one ``beta`` per link.

    The reduced Hamiltonian is ``H/T = -sum_links beta * s_a * s_b``.
    """

    link_a: np.ndarray
    link_b: np.ndarray
    beta: np.ndarray
    n_sites: int

    def __post_init__(self):
        if not (self.link_a.shape == self.link_b.shape == self.beta.shape):
            raise SizeMismatchError("link endpoint and coupling arrays differ in length")
        if self.beta.size and self.beta.min() < 0:
            raise ValueError("couplings must be non-negative (ferromagnetic)")

    @classmethod
    def from_lattice(cls, lat, beta=None) -> "Couplings":
        b = lat.couplings() if beta is None else np.asarray(beta, dtype=float)
        return cls(lat.link_a, lat.link_b, b, lat.n_sites)

    @property
    def n_links(self) -> int:
        return int(self.link_a.size)

    def with_beta(self, beta) -> "Couplings":
        return Couplings(self.link_a, self.link_b, np.asarray(beta, dtype=float), self.n_sites)

    def activation(self) -> np.ndarray:
        """Bond activation probabilities ``1 - exp(-2 beta)``."""
        return -np.expm1(-2.0 * self.beta)


def cold_start(n_sites: int) -> np.ndarray:
    return np.ones(n_sites, dtype=np.int8)


def _check_config(config: np.ndarray, couplings: Couplings):
    if config.shape != (couplings.n_sites,):
        raise SizeMismatchError(
            f"configuration has {config.size} spins, couplings expect {couplings.n_sites}")


@nb.njit(inline="always")
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@nb.njit(cache=True, nogil=True)
def sw_kernel(spins, link_a, link_b, p_act, key, ctr, parent):
    """One Swendsen-Wang update in place; returns the advanced counter."""
    n = spins.size
    ne = link_a.size
    for i in range(n):
        parent[i] = i
    for e in range(ne):
        a = link_a[e]
        b = link_b[e]
        if spins[a] == spins[b] and p_act[e] > 0.0:
            if uniform(key, ctr + np.uint64(e)) < p_act[e]:
                ra = _find(parent, a)
                rb = _find(parent, b)
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
    ctr += np.uint64(ne)
    for i in range(n):
        r = _find(parent, i)
        if uniform(key, ctr + np.uint64(r)) < 0.5:
            spins[i] = -spins[i]
    return ctr + np.uint64(n)


@nb.njit(cache=True, nogil=True)
def _sw_bonds(spins, link_a, link_b, p_act, key, ctr):
    active = np.zeros(link_a.size, dtype=np.bool_)
    for e in range(link_a.size):
        if spins[link_a[e]] == spins[link_b[e]] and p_act[e] > 0.0:
            active[e] = uniform(key, ctr + np.uint64(e)) < p_act[e]
    return active


@nb.njit(cache=True, nogil=True)
def metropolis_kernel(spins, nbr_ptr, nbr_site, nbr_beta, key, ctr):
    """One lexicographic single-spin Metropolis sweep in place."""
    n = spins.size
    for i in range(n):
        h = 0.0
        for j in range(nbr_ptr[i], nbr_ptr[i + 1]):
            h += nbr_beta[j] * spins[nbr_site[j]]
        dh = 2.0 * spins[i] * h  # change of H/T when s_i flips
        if dh <= 0.0 or uniform(key, ctr + np.uint64(i)) < np.exp(-dh):
            spins[i] = -spins[i]
    return ctr + np.uint64(n)


def neighbour_table(couplings: Couplings):
    """CSR adjacency ``(ptr, site, beta)``; a link to oneself is not allowed."""
    a, b, w = couplings.link_a, couplings.link_b, couplings.beta
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    ww = np.concatenate([w, w])
    order = np.argsort(src, kind="stable")
    ptr = np.zeros(couplings.n_sites + 1, dtype=np.int64)
    np.add.at(ptr, src + 1, 1)
    return np.cumsum(ptr), dst[order].astype(np.int64), ww[order].astype(float)


def reduced_energy(config: np.ndarray, couplings: Couplings) -> float:
    """``H/T = -sum_links beta_link * s_a * s_b``."""
    _check_config(config, couplings)
    s = config.astype(np.int64)
    return float(-np.dot(couplings.beta, s[couplings.link_a] * s[couplings.link_b]))


def swendsen_wang_update(config: np.ndarray, couplings: Couplings, stream: Stream) -> np.ndarray:
    """One Swendsen-Wang cluster update of ``config`` (modified in place)."""
    _check_config(config, couplings)
    parent = np.empty(couplings.n_sites, dtype=np.int64)
    ctr = sw_kernel(config, couplings.link_a, couplings.link_b, couplings.activation(),
                    np.uint64(stream.key), np.uint64(stream.counter), parent)
    stream.counter = int(ctr)
    return config


def active_bonds(config: np.ndarray, couplings: Couplings, stream: Stream) -> np.ndarray:
    """Bond mask the next Swendsen-Wang update would activate (stream not advanced)."""
    _check_config(config, couplings)
    return _sw_bonds(config, couplings.link_a, couplings.link_b, couplings.activation(),
                     np.uint64(stream.key), np.uint64(stream.counter))


def metropolis_sweep(config: np.ndarray, couplings: Couplings, stream: Stream,
                     table=None) -> np.ndarray:
    """One lexicographic Metropolis sweep of ``config`` (modified in place)."""
    _check_config(config, couplings)
    ptr, site, w = neighbour_table(couplings) if table is None else table
    ctr = metropolis_kernel(config, ptr, site, w, np.uint64(stream.key), np.uint64(stream.counter))
    stream.counter = int(ctr)
    return config

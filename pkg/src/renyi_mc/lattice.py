"""Replica-coupled hypercubic Ising lattices with a cut.

Sites are indexed row-major over ``(replica, tau, x[, y])``.  The spatial
coordinate ``x`` runs orthogonally to the entangling surface, so subsystem A
is the set of columns ``x < l``; in three dimensions ``y`` runs along the
surface.  Every site owns one forward link per direction, enumerated in the
order ``(tau, x[, y])``, which fixes the link order for reproducibility.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

BETA_C_2D = 0.5 * math.log(1.0 + math.sqrt(2.0))
BETA_C_3D = 0.221654626


class GeometryError(ValueError):
    """Invalid lattice geometry or cut request."""


class LinkClass(enum.IntEnum):
    BULK = 0
    INTRA_CUT = 1
    INTER_CUT = 2


class Direction(str, enum.Enum):
    """Which way a non-equilibrium step moves the cut.

    ``DIRECT`` grows the cut (``l -> l + 1``), ``REVERSE`` shrinks it
    (``l -> l - 1``).
    """

    DIRECT = "direct"
    REVERSE = "reverse"

    @classmethod
    def parse(cls, value: "Direction | str") -> "Direction":
        if isinstance(value, Direction):
            return value
        aliases = {"direct": cls.DIRECT, "grow": cls.DIRECT,
                   "reverse": cls.REVERSE, "shrink": cls.REVERSE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown direction {value!r}") from None

    @property
    def sign(self) -> int:
        return 1 if self is Direction.DIRECT else -1


@dataclass(frozen=True)
class LatticeSpec:
    D: int
    L: int
    Ltau: int
    n_replicas: int
    beta: float

    def __post_init__(self):
        if self.D not in (2, 3):
            raise GeometryError(f"D must be 2 or 3, got {self.D}")
        if self.L < 2 or self.Ltau < 2:
            raise GeometryError(f"need L >= 2 and Ltau >= 2, got L={self.L}, Ltau={self.Ltau}")
        if self.n_replicas < 1:
            raise GeometryError(f"n_replicas must be positive, got {self.n_replicas}")
        if not self.beta >= 0.0:
            raise GeometryError(f"beta must be non-negative, got {self.beta}")

    @property
    def sites_per_replica(self) -> int:
        return self.L ** (self.D - 1) * self.Ltau

    @property
    def surface_sites(self) -> int:
        """Sites in one column of the cut slice, ``L**(D-2)``."""
        return self.L ** (self.D - 2)


@dataclass(frozen=True)
class CutSpec:
    l: int
    tau0: int = 0


def _site_index(spec: LatticeSpec, k, tau, x, y=0):
    idx = (k * spec.Ltau + tau) * spec.L + x
    if spec.D == 3:
        idx = idx * spec.L + y
    return idx


@dataclass(frozen=True)
class EdgeLinks:
    """The cut links toggled by one ``l -> l +- 1`` step.

    Each *pair* is a lower site at the cut slice together with its two
    candidate partners one slice up: the same replica (intra) and the next
    replica (inter).  ``subset`` labels the position along the entangling
    surface and is used by staged protocols.
    """

    column: int
    direction: Direction
    lower: np.ndarray
    intra_upper: np.ndarray
    inter_upper: np.ndarray
    subset: np.ndarray
    n_subsets: int

    @property
    def n_pairs(self) -> int:
        return int(self.lower.size)

    def __len__(self) -> int:
        return 2 * self.n_pairs

    @property
    def links(self) -> list[tuple[int, int, LinkClass]]:
        out = [(int(a), int(b), LinkClass.INTRA_CUT) for a, b in zip(self.lower, self.intra_upper)]
        out += [(int(a), int(b), LinkClass.INTER_CUT) for a, b in zip(self.lower, self.inter_upper)]
        return out


@dataclass(frozen=True)
class ReplicaLattice:
    spec: LatticeSpec
    cut: CutSpec
    link_a: np.ndarray
    link_b: np.ndarray
    link_class: np.ndarray
    _cut_link_of_site: dict = field(repr=False, compare=False)

    @property
    def n_sites(self) -> int:
        return self.spec.n_replicas * self.spec.sites_per_replica

    @property
    def n_links(self) -> int:
        return int(self.link_a.size)

    @property
    def links(self) -> list[tuple[int, int, LinkClass]]:
        return [(int(a), int(b), LinkClass(int(c)))
                for a, b, c in zip(self.link_a, self.link_b, self.link_class)]

    def count(self, cls: LinkClass) -> int:
        return int(np.count_nonzero(self.link_class == cls))

    def couplings(self) -> np.ndarray:
        """Uniform coupling ``beta`` on every link of the static lattice."""
        return np.full(self.n_links, float(self.spec.beta))

    def site(self, k: int, tau: int, x: int, y: int = 0) -> int:
        s = self.spec
        return int(_site_index(s, k % s.n_replicas, tau % s.Ltau, x % s.L, y % s.L))

    def edge_links(self, direction: Direction | str) -> EdgeLinks:
        return edge_links_for_step(self, self.cut.l, direction)

    def working_links(self, edge: EdgeLinks):
        """Link table for a trajectory that toggles ``edge``.

        The static cut links of the edge sites are dropped and replaced by
        both candidates, intra block first, then inter block, appended at
        the end.  Returns ``(link_a, link_b, n_static)``.
        """
        drop = np.array([self._cut_link_of_site[int(s)] for s in edge.lower], dtype=np.int64)
        keep = np.ones(self.n_links, dtype=bool)
        keep[drop] = False
        a = np.concatenate([self.link_a[keep], edge.lower, edge.lower])
        b = np.concatenate([self.link_b[keep], edge.intra_upper, edge.inter_upper])
        return a.astype(np.int64), b.astype(np.int64), int(keep.sum())


def _build_links(spec: LatticeSpec, l: int, tau0: int):
    D, L, Lt, n = spec.D, spec.L, spec.Ltau, spec.n_replicas
    shape = (n, Lt, L) if D == 2 else (n, Lt, L, L)
    idx = np.arange(n * spec.sites_per_replica, dtype=np.int64).reshape(shape)
    tau = np.arange(Lt).reshape((1, Lt) + (1,) * (D - 1))
    x = np.arange(L).reshape((1, 1, L) + (1,) * (D - 2))

    targets = []
    classes = []
    # time links; the cut slice is rewired for sites in A
    up = np.roll(idx, -1, axis=1)
    next_rep = np.roll(up, -1, axis=0)
    at_cut = (tau == tau0)
    in_a = at_cut & (x < l)
    t_tgt = np.where(in_a, next_rep, up)
    t_cls = np.where(in_a, LinkClass.INTER_CUT,
                     np.where(at_cut, LinkClass.INTRA_CUT, LinkClass.BULK))
    t_cls = np.broadcast_to(t_cls, shape)
    targets.append(np.broadcast_to(t_tgt, shape))
    classes.append(t_cls)
    for axis in range(2, D + 1):
        targets.append(np.roll(idx, -1, axis=axis))
        classes.append(np.full(shape, LinkClass.BULK))

    a = np.stack([idx] * D, axis=-1).ravel()
    b = np.stack(targets, axis=-1).ravel()
    c = np.stack(classes, axis=-1).ravel().astype(np.int8)
    return a, b, c


def build_replica_lattice(spec: LatticeSpec, cut: CutSpec) -> ReplicaLattice:
    """Build the n-replica lattice with a cut of length ``cut.l``."""
    if spec.n_replicas < 2:
        raise GeometryError(f"a replica lattice needs n_replicas >= 2, got {spec.n_replicas}")
    if not 0 <= cut.l <= spec.L:
        raise GeometryError(f"cut length l={cut.l} outside [0, L={spec.L}]")
    if not 0 <= cut.tau0 < spec.Ltau:
        raise GeometryError(f"cut slice tau0={cut.tau0} outside [0, Ltau={spec.Ltau})")
    a, b, c = _build_links(spec, cut.l, cut.tau0)
    for arr in (a, b, c):
        arr.flags.writeable = False
    cut_links = np.flatnonzero(c != LinkClass.BULK)
    lookup = {int(a[i]): int(i) for i in cut_links}
    return ReplicaLattice(spec, cut, a, b, c, lookup)


def single_replica_links(spec: LatticeSpec):
    """Link endpoints of one periodic replica (no cut)."""
    one = LatticeSpec(spec.D, spec.L, spec.Ltau, 1, spec.beta)
    a, b, _ = _build_links(one, 0, 0)
    return a, b


def edge_links_for_step(lat: ReplicaLattice, l: int, direction: Direction | str) -> EdgeLinks:
    """Links whose couplings vary when the cut moves ``l -> l +- 1``.

    ``lat`` must carry the cut the step starts from.  Growing toggles
    column ``l``, shrinking toggles column ``l - 1``.
    """
    direction = Direction.parse(direction)
    spec = lat.spec
    if l != lat.cut.l:
        raise GeometryError(f"lattice has cut l={lat.cut.l}, step requested from l={l}")
    if direction is Direction.DIRECT:
        if not 0 <= l <= spec.L - 1:
            raise GeometryError(f"cannot grow the cut from l={l} with L={spec.L}")
        column = l
    else:
        if not 1 <= l <= spec.L:
            raise GeometryError(f"cannot shrink the cut from l={l}")
        column = l - 1
    n, m = spec.n_replicas, spec.surface_sites
    tau0 = lat.cut.tau0
    k = np.repeat(np.arange(n), m)
    y = np.tile(np.arange(m), n)
    up = (tau0 + 1) % spec.Ltau
    lower = _site_index(spec, k, tau0, column, y)
    intra = _site_index(spec, k, up, column, y)
    inter = _site_index(spec, (k + 1) % n, up, column, y)
    return EdgeLinks(column, direction, lower.astype(np.int64), intra.astype(np.int64),
                     inter.astype(np.int64), y.astype(np.int64), m)


def dual_beta(beta: float) -> float:
    """Kramers-Wannier dual coupling, ``tanh(beta*) = exp(-2 beta)``."""
    if not beta > 0:
        raise ValueError(f"dual_beta needs beta > 0, got {beta}")
    # atanh(exp(-2b)) written to stay accurate for small and large b
    return -0.5 * math.log(math.tanh(beta))

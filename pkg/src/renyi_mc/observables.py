"""From free-energy differences to Renyi increments, c-functions and entropies.

Sign convention: ``S_n = log(Z_n / Z^n) / (1 - n)``, so an increment
``Delta S_n = S_n(l + 1) - S_n(l) = -log(Z_n(l+1) / Z_n(l)) / (n - 1)`` is
positive when the replica partition function drops as the cut grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fit import FitResult, weighted_fit
from .jarzynski import JarzynskiEstimate
from .lattice import Direction
from .special import ModelId, systematics_third_derivative


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenyiIncrement:
    value: float
    err: float


@dataclass(frozen=True)
class CFunctionPoint:
    x: float
    c_value: float
    stat_err: float
    sys_err: float
    l: int
    L: int
    D: int
    n: int = 2
    beta: float = float("nan")
    direction: str = "combined"

    def __post_init__(self):
        if self.stat_err < 0 or self.sys_err < 0:
            raise ValueError("errors must be non-negative")

    @property
    def total_err(self) -> float:
        return math.hypot(self.stat_err, self.sys_err)


@dataclass(frozen=True)
class EntropyCurve:
    l: np.ndarray
    S: np.ndarray  # S(l) - S(l[0]); S[0] = 0
    err: np.ndarray


def delta_renyi(est: JarzynskiEstimate, n: int = 2) -> RenyiIncrement:
    """``Delta S_n`` for the step ``l -> l + 1`` from either orientation of the estimate.

    A reverse estimate (``l + 1 -> l``) is flipped first.
    """
    if n < 2:
        raise ValueError(f"replica number must be >= 2, got {n}")
    if est.direction is Direction.REVERSE:
        est = est.flipped()
    return RenyiIncrement(-est.log_ratio / (n - 1), est.stat_err / (n - 1))


def cfunction_prefactor(x, L: int, D: int):
    """``[L sin(pi x) / pi]^(D-1) / |dA|`` with ``|dA| = 2 L^(D-2)``."""
    return (L * np.sin(np.pi * np.asarray(x)) / np.pi) ** (D - 1) / (2.0 * L ** (D - 2))


def entropic_cfunction(dS, l: int, L: int, D: int, n: int = 2, *, beta: float = float("nan"),
                       stat_err: float | None = None, direction: str = "combined") -> CFunctionPoint:
    """C-function point at ``x = (l - 0.5) / L`` from the increment ``S(l) - S(l - 1)``.

    ``dS`` is a float or a :class:`RenyiIncrement`; its error is scaled along.
    """
    if not 1 <= l <= L:
        raise ValueError(f"cut step l={l} outside [1, {L}]")
    if isinstance(dS, RenyiIncrement):
        stat_err = dS.err if stat_err is None else stat_err
        dS = dS.value
    x = (l - 0.5) / L
    pref = float(cfunction_prefactor(x, L, D))
    return CFunctionPoint(x, pref * dS, pref * (stat_err or 0.0), 0.0, l, L, D, n, beta, direction)


def reconstruct_entropy(increments) -> EntropyCurve:
    """Cumulative sum of ``(l, dS, err)`` increments, ``dS`` being ``S(l) - S(l - 1)``.

    Errors add in quadrature; the curve starts at ``l_first - 1`` with ``S = 0``.
    """
    rows = sorted((int(l), float(d), float(e)) for l, d, e in increments)
    if not rows:
        raise ValueError("no increments given")
    ls = np.array([r[0] for r in rows])
    if np.any(np.diff(ls) != 1):
        raise ValueError(f"increments must cover contiguous l, got {ls.tolist()}")
    d = np.array([r[1] for r in rows])
    e = np.array([r[2] for r in rows])
    return EntropyCurve(np.concatenate([[ls[0] - 1], ls]),
                        np.concatenate([[0.0], np.cumsum(d)]),
                        np.concatenate([[0.0], np.sqrt(np.cumsum(e * e))]))


@dataclass(frozen=True)
class AntisymmetryReport:
    pairs: list  # (x, 1 - x, pull)
    max_pull: float
    passed: bool


def zero_temperature_check(points, threshold: float = 3.0, xtol: float = 1e-9) -> AntisymmetryReport:
    """Pulls ``|C(x) + C(1 - x)| / sigma`` over all mirror pairs; uses total errors."""
    pts = sorted(points, key=lambda p: p.x)
    pairs = []
    for i, p in enumerate(pts):
        if p.x > 0.5 + xtol:
            break
        for q in pts[i:]:
            if abs(p.x + q.x - 1.0) <= xtol:
                sigma = math.hypot(p.total_err, q.total_err)
                s = p.c_value + q.c_value
                if q is p:
                    s, sigma = p.c_value, p.total_err
                pull = abs(s) / sigma if sigma > 0 else (0.0 if s == 0 else math.inf)
                pairs.append((p.x, q.x, pull))
                break
    max_pull = max((pp[2] for pp in pairs), default=0.0)
    return AntisymmetryReport(pairs, max_pull, max_pull <= threshold)


def _sys_values(points, model: ModelId, params, L: int, n: int) -> np.ndarray:
    out = np.empty(len(points))
    for i, p in enumerate(points):
        g3 = systematics_third_derivative(model, p.x, params, L, n)
        out[i] = (math.sin(math.pi * p.x) / math.pi) ** (p.D - 1) * abs(g3) / (48.0 * p.L ** 2)
    return out


def systematic_error(points, model: ModelId | str, params, n: int = 2) -> list[CFunctionPoint]:
    """Fill ``sys_err`` from the third derivative of the model at ``params``."""
    model = ModelId.parse(model)
    pts = list(points)
    if not pts:
        return []
    sys = _sys_values(pts, model, params, pts[0].L, n)
    return [replace(p, sys_err=float(s)) for p, s in zip(pts, sys)]


@dataclass(frozen=True)
class SystematicsResult:
    points: list
    fit: FitResult
    iterations: int


def iterate_systematics(points, model: ModelId | str, *, mask=None, n: int = 2, rtol: float = 0.01,
                        max_iter: int = 20) -> SystematicsResult:
    """Fit, assign ``sys_err`` from the fit, refit with combined errors, repeat.

    Stops once every ``sys_err`` moves by less than ``rtol`` relative to its
    previous value.
    """
    model = ModelId.parse(model)
    pts = sorted(points, key=lambda p: p.x)
    L = pts[0].L
    sys = np.zeros(len(pts))
    for it in range(1, max_iter + 1):
        data = [(p.x, p.c_value, math.hypot(p.stat_err, s)) for p, s in zip(pts, sys)]
        res = weighted_fit(data, model, L=L, n=n, mask=mask)
        new = _sys_values(pts, model, res.params, L, n)
        scale = np.maximum(np.abs(sys), 1e-300)
        done = it > 1 and np.all(np.abs(new - sys) <= rtol * scale)
        sys = new
        if done:
            out = [replace(p, sys_err=float(s)) for p, s in zip(pts, sys)]
            return SystematicsResult(out, res, it)
    raise ConvergenceError(f"systematic errors did not settle within {max_iter} iterations")


def higher_order_difference(increments, L: int, D: int) -> list[tuple[int, float, float, float]]:
    """Model-independent discretisation check from neighbouring increments.

    The fourth-order midpoint derivative is
    ``(26 dS_l - dS_{l-1} - dS_{l+1}) / 24``; its difference from ``dS_l``,
    converted to c-function units, estimates the midpoint-rule error.
    Returns ``(l, x, delta_C, err)`` for every interior ``l``.
    """
    rows = {int(l): (float(d), float(e)) for l, d, e in increments}
    out = []
    for l in sorted(rows):
        if l - 1 in rows and l + 1 in rows:
            (dm, em), (d0, e0), (dp, ep) = rows[l - 1], rows[l], rows[l + 1]
            x = (l - 0.5) / L
            pref = float(cfunction_prefactor(x, L, D))
            delta = pref * (dp - 2.0 * d0 + dm) / 24.0
            err = pref * math.sqrt(ep ** 2 + 4 * e0 ** 2 + em ** 2) / 24.0
            out.append((l, x, delta, err))
    return out

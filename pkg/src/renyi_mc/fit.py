"""Weighted least-squares fits of c-function and entropy data to model curves.

Every model is linear in its parameters once the fixed offset is removed, so
fits are solved in closed form from the normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .special import ModelId, design


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    model: ModelId
    params: np.ndarray
    errors: np.ndarray
    chi2: float
    chi2_reduced: float
    ndof: int
    points_used: int
    covariance: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        names = self.model.param_names
        return {
            "model": self.model.value,
            "params": {k: float(v) for k, v in zip(names, self.params)},
            "errors": {k: float(v) for k, v in zip(names, self.errors)},
            "chi2": self.chi2,
            "chi2_reduced": self.chi2_reduced,
            "ndof": self.ndof,
            "points_used": self.points_used,
        }


def _arrays(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise FitError("points must be a sequence of (x, y, sigma)")
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _apply_mask(n, mask):
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise FitError(f"mask has shape {mask.shape}, expected ({n},)")
    return mask


def exclusion_mask(n: int, first: int = 0, last: int = 0) -> np.ndarray:
    """Keep-mask dropping the ``first`` leading and ``last`` trailing points (in x order)."""
    if first < 0 or last < 0 or first + last > n:
        raise FitError(f"cannot exclude {first}+{last} of {n} points")
    keep = np.ones(n, dtype=bool)
    keep[:first] = False
    keep[n - last:] = False
    return keep


def weighted_fit(points, model: ModelId | str, L: int | None = None, n: int = 2,
                 mask=None) -> FitResult:
    """Closed-form weighted linear fit of ``(x, y, sigma)`` points.

    Parameter errors come from ``(A^T W A)^-1`` with the quoted sigmas, not
    rescaled by the reduced chi-square.
    """
    model = ModelId.parse(model)
    x, y, s = _arrays(points)
    keep = _apply_mask(x.size, mask)
    x, y, s = x[keep], y[keep], s[keep]
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise FitError("all sigmas must be positive and finite")
    ndof = x.size - model.arity
    if ndof < 1:
        raise FitError(f"{x.size} point(s) leave no degrees of freedom for {model.value}")
    offset, A = design(model, x, L, n)
    w = 1.0 / s
    Aw = A * w[:, None]
    rw = (y - offset) * w
    normal = Aw.T @ Aw
    if np.linalg.matrix_rank(normal) < model.arity:
        raise FitError("singular normal matrix (degenerate abscissae?)")
    cov = np.linalg.inv(normal)
    params = cov @ (Aw.T @ rw)
    resid = rw - Aw @ params
    c2 = float(resid @ resid)
    return FitResult(model, params, np.sqrt(np.diag(cov)), c2, c2 / ndof, int(ndof), int(x.size), cov)


def chi2(points, model: ModelId | str, params, L: int | None = None, n: int = 2,
         mask=None) -> tuple[float, float]:
    """``(chi2, chi2 / ndof)`` for externally supplied parameters.

    No parameters are fitted, so ``ndof`` is the number of points used.
    """
    model = ModelId.parse(model)
    x, y, s = _arrays(points)
    keep = _apply_mask(x.size, mask)
    x, y, s = x[keep], y[keep], s[keep]
    if x.size == 0:
        raise FitError("no points left after masking")
    offset, A = design(model, x, L, n)
    r = (y - offset - A @ np.atleast_1d(np.asarray(params, dtype=float))) / s
    c2 = float(r @ r)
    return c2, c2 / x.size

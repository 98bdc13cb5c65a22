"""Special functions and model curves for entropies and c-functions.

All theta/eta arguments are on the imaginary axis, ``tau = i t``, with the
nome conventions ``q = exp(2 pi i tau)`` for eta and ``q = exp(i pi tau)`` for
theta_3.  For small ``t`` the series are evaluated after the modular map
``t -> 1/t``.

The holographic curves use ``P(chi, y) = 1 - chi y^3 - (1 - chi) y^4``,
which factors as ``(1 - y) Q(chi, y)`` with
``Q = 1 + y + y^2 + (1 - chi) y^3``; after ``y = 1 - u^2`` every integrand
below is regular on ``[0, 1]``.
"""

from __future__ import annotations

import enum
import math
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

_MODULAR_SWITCH = 0.25
_QUAD_TOL = 1e-12


def _check_t(t):
    if not t > 0:
        raise ValueError(f"argument must be positive, got t={t}")


def _log_eta_series(t):
    q = math.exp(-2.0 * math.pi * t)
    total = -math.pi * t / 12.0
    qm = q
    while True:
        term = math.log1p(-qm)
        total += term
        if abs(term) < 1e-17 or qm < 1e-300:
            break
        qm *= q
    return total


def _dlog_eta_series(t):
    q = math.exp(-2.0 * math.pi * t)
    total = -math.pi / 12.0
    m = 1
    qm = q
    while True:
        term = 2.0 * math.pi * m * qm / (1.0 - qm)
        total += term
        if term < 1e-17 * abs(total) or qm < 1e-300:
            break
        m += 1
        qm *= q
    return total


def _theta3_series(t):
    q = math.exp(-math.pi * t)
    total = 1.0
    m = 1
    while True:
        term = 2.0 * q ** (m * m)
        total += term
        if term < 1e-17:
            break
        m += 1
    return total


def _dtheta3_series(t):
    q = math.exp(-math.pi * t)
    total = 0.0
    m = 1
    while True:
        term = -2.0 * math.pi * m * m * q ** (m * m)
        total += term
        if abs(term) < 1e-17:
            break
        m += 1
    return total


def log_dedekind_eta(t: float) -> float:
    _check_t(t)
    if t < _MODULAR_SWITCH:
        return _log_eta_series(1.0 / t) - 0.5 * math.log(t)
    return _log_eta_series(t)


def dedekind_eta(t: float) -> float:
    """``eta(i t) = q^(1/24) prod_m (1 - q^m)``, ``q = exp(-2 pi t)``."""
    return math.exp(log_dedekind_eta(t))


def dlog_dedekind_eta(t: float) -> float:
    """``d/dt log eta(i t)``."""
    _check_t(t)
    if t < _MODULAR_SWITCH:
        s = 1.0 / t
        return -_dlog_eta_series(s) * s * s - 0.5 / t
    return _dlog_eta_series(t)


def jacobi_theta3(t: float) -> float:
    """``theta_3(0 | i t) = 1 + 2 sum_m q^(m^2)``, ``q = exp(-pi t)``."""
    _check_t(t)
    if t < _MODULAR_SWITCH:
        return _theta3_series(1.0 / t) / math.sqrt(t)
    return _theta3_series(t)


def log_jacobi_theta3(t: float) -> float:
    _check_t(t)
    if t < _MODULAR_SWITCH:
        return math.log(_theta3_series(1.0 / t)) - 0.5 * math.log(t)
    return math.log(_theta3_series(t))


def dlog_jacobi_theta3(t: float) -> float:
    """``d/dt log theta_3(0 | i t)``."""
    _check_t(t)
    if t < _MODULAR_SWITCH:
        s = 1.0 / t
        return -(_dtheta3_series(s) / _theta3_series(s)) * s * s - 0.5 / t
    return _dtheta3_series(t) / _theta3_series(t)


# RVB torus function (tau = i) ---------------------------------------------

@lru_cache(maxsize=None)
def _rvb_const():
    return 2.0 * log_dedekind_eta(1.0) - log_jacobi_theta3(2.0) - log_jacobi_theta3(0.5)


def rvb_log_ratio(x: float) -> float:
    """Logarithm of the torus ratio inside ``g_RVB``; ``g_RVB = -2 c * this + k``."""
    a, b = 2.0 * x, 2.0 * (1.0 - x)
    return (_rvb_const() + log_jacobi_theta3(a) + log_jacobi_theta3(b)
            - log_dedekind_eta(a) - log_dedekind_eta(b))


def rvb_log_ratio_dx(x: float) -> float:
    a, b = 2.0 * x, 2.0 * (1.0 - x)
    return 2.0 * (dlog_jacobi_theta3(a) - dlog_jacobi_theta3(b)
                  - dlog_dedekind_eta(a) + dlog_dedekind_eta(b))


# holographic (AdS) function ------------------------------------------------

def _quad(f, a=0.0, b=1.0):
    val, _ = quad(f, a, b, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=400)
    return val


def _quad_near_one(f, chi):
    # integrands in J peak at u ~ sqrt(1 - chi) when chi -> 1
    w = math.sqrt(max(1.0 - chi, 0.0))
    if w < 0.05:
        cuts = [0.0] + [c for c in (w, 3 * w, 10 * w, 30 * w, 100 * w, 300 * w) if c < 1.0] + [1.0]
        return sum(_quad(f, lo, hi) for lo, hi in zip(cuts, cuts[1:]))
    return _quad(f)


def _yQ(chi, u):
    y = 1.0 - u * u
    return y, 1.0 + y + y * y + (1.0 - chi) * y ** 3


def _one_minus_chi_y3(chi, u, y):
    # 1 - chi y^3 without cancellation as chi -> 1, u -> 0
    return (1.0 - chi) + chi * u * u * (1.0 + y + y * y)


def _ads_J(chi):
    def f(u):
        y, Q = _yQ(chi, u)
        return 2.0 * y * y / (_one_minus_chi_y3(chi, u, y) * math.sqrt(Q))
    return _quad_near_one(f, chi)


def _ads_dJ(chi):
    def f(u):
        y, Q = _yQ(chi, u)
        d = _one_minus_chi_y3(chi, u, y)
        return 2.0 * y ** 5 * (1.0 / (d * d * math.sqrt(Q)) + 0.5 / (d * Q ** 1.5))
    return _quad_near_one(f, chi)


def _ads_I(chi):
    def f(u):
        y, Q = _yQ(chi, u)
        sq = math.sqrt(Q)
        return 2.0 * y * (chi + (1.0 - chi) * y) / (sq * (1.0 + u * sq))
    return _quad(f)


def _ads_dI(chi):
    def f(u):
        y, Q = _yQ(chi, u)
        return y / Q ** 1.5
    return _quad(f)


def ads_integrand(chi: float, y: float) -> float:
    """``(1/y^2) (1/sqrt(P) - 1)`` written without cancellation at small ``y``."""
    P = 1.0 - chi * y ** 3 - (1.0 - chi) * y ** 4
    sp = math.sqrt(P)
    return y * (chi + (1.0 - chi) * y) / (sp * (1.0 + sp))


def ads_x_of_chi(chi: float) -> float:
    """Strip width ``x(chi)`` of the holographic surface."""
    if not 0.0 < chi < 1.0:
        raise ValueError(f"chi must lie in (0, 1), got {chi}")
    return 1.5 / math.pi * chi ** (1 / 3) * math.sqrt(1.0 - chi) * _ads_J(chi)


def _ads_dx_dchi(chi):
    J, dJ = _ads_J(chi), _ads_dJ(chi)
    c13 = chi ** (1 / 3)
    s = math.sqrt(1.0 - chi)
    return 1.5 / math.pi * (J * s / (3.0 * c13 * c13) - 0.5 * c13 * J / s + c13 * s * dJ)


ADS_X_MAX = 0.5


def ads_chi_of_x(x: float) -> float:
    """Invert :func:`ads_x_of_chi`; ``x = 1/2`` maps to the limit ``chi = 1``."""
    if not 0.0 < x <= ADS_X_MAX:
        raise ValueError(f"x={x} outside the attainable range (0, {ADS_X_MAX}]")
    if x == ADS_X_MAX:
        return 1.0
    lo = 1e-300
    # near x = 1/2, x(chi) ~ 1/2 - 0.32 sqrt(1 - chi); stay just beyond the root
    hi = 1.0 - ((0.5 - x) / 10.0) ** 2
    # x(chi) ~ const * chi^(1/3) for small chi: bracket tightly
    guess = (2.0 * math.pi * x / (3.0 * _ads_J(0.0))) ** 3
    if guess < 0.5 and ads_x_of_chi(min(8 * guess, 0.5)) > x:
        hi = min(8 * guess, 0.5)
        lo = guess / 8
    return brentq(lambda c: ads_x_of_chi(c) - x, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                  maxiter=500)


def _ads_G(chi):
    return chi ** (-1 / 3) * (_ads_I(chi) - 1.0)


def ads_entropy_shape(x: float) -> float:
    """``chi^(-1/3) * (int_0^1 dy/y^2 (1/sqrt(P) - 1) - 1)`` at ``chi(x)``, reflected about 1/2."""
    return _ads_G(ads_chi_of_x(min(x, 1.0 - x)))


def ads_entropy_shape_dx(x: float) -> float:
    xm = min(x, 1.0 - x)
    if xm == 0.5:
        return 0.0
    chi = ads_chi_of_x(xm)
    dG = -_ads_G(chi) / (3.0 * chi) + chi ** (-1 / 3) * _ads_dI(chi)
    val = dG / _ads_dx_dchi(chi)
    return val if x <= 0.5 else -val


# models ---------------------------------------------------------------------

class ModelId(str, enum.Enum):
    CFT2D_PLANE = "CFT2D_plane"
    CFT2D_CYLINDER = "CFT2D_cylinder"
    FIT2D_CORRECTED = "Fit2D_corrected"
    G2D = "G2D"
    GRVB = "GRVB"
    GADS = "GADS"
    F2D = "F2D"
    FRVB = "FRVB"
    FADS = "FADS"

    @classmethod
    def parse(cls, name) -> "ModelId":
        if isinstance(name, ModelId):
            return name
        for m in cls:
            if m.value.lower() == str(name).lower() or m.name.lower() == str(name).lower():
                return m
        raise ValueError(f"unknown model {name!r}")

    @property
    def param_names(self) -> tuple[str, ...]:
        if self is ModelId.FIT2D_CORRECTED:
            return ("k",)
        if self in (ModelId.G2D, ModelId.GRVB, ModelId.GADS):
            return ("c", "k")
        return ("c",)

    @property
    def arity(self) -> int:
        return len(self.param_names)

    @property
    def is_entropy(self) -> bool:
        return self in (ModelId.G2D, ModelId.GRVB, ModelId.GADS)


def _vec(fn, x):
    return np.array([fn(float(v)) for v in np.atleast_1d(x)])


def _check_x(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((x <= 0.0) | (x >= 1.0)):
        raise ValueError("model curves need x strictly inside (0, 1)")
    return x


def design(model: ModelId | str, x, L: int | None = None, n: int = 2):
    """Linear parameterisation ``value = offset + basis @ params``.

    Returns ``(offset, basis)`` with shapes ``(m,)`` and ``(m, arity)``.
    """
    model = ModelId.parse(model)
    x = _check_x(x)
    px = math.pi * x
    zero = np.zeros_like(x)
    pref = (1.0 + 1.0 / n) / 12.0
    s2 = np.sin(px) ** 2 / (2 * math.pi ** 2)
    if model is ModelId.CFT2D_PLANE:
        return zero, np.full((x.size, 1), pref)
    if model is ModelId.CFT2D_CYLINDER:
        return zero, (pref * np.cos(px))[:, None]
    if model is ModelId.FIT2D_CORRECTED:
        if L is None:
            raise ValueError("Fit2D_corrected needs the lattice size L")
        return np.cos(px) / 16.0, (1.0 / np.tan(px) / (2.0 * L))[:, None]
    if model is ModelId.G2D:
        return zero, np.column_stack([np.log(np.sin(px)), np.ones_like(x)])
    if model is ModelId.GRVB:
        return zero, np.column_stack([-2.0 * _vec(rvb_log_ratio, x), np.ones_like(x)])
    if model is ModelId.GADS:
        return zero, np.column_stack([_vec(ads_entropy_shape, x), np.ones_like(x)])
    if model is ModelId.F2D:
        return zero, (np.sin(px) * np.cos(px) / (2 * math.pi))[:, None]
    if model is ModelId.FRVB:
        return zero, (s2 * -2.0 * _vec(rvb_log_ratio_dx, x))[:, None]
    if model is ModelId.FADS:
        return zero, (s2 * _vec(ads_entropy_shape_dx, x))[:, None]
    raise AssertionError(model)


def _check_params(model: ModelId, params):
    params = np.atleast_1d(np.asarray(params, dtype=float))
    if params.size != model.arity:
        raise ValueError(f"{model.value} takes {model.arity} parameter(s) "
                         f"{model.param_names}, got {params.size}")
    return params


def model_eval(model: ModelId | str, x, params, L: int | None = None, n: int = 2):
    """Evaluate a model curve; returns a float for scalar ``x``."""
    model = ModelId.parse(model)
    params = _check_params(model, params)
    offset, basis = design(model, x, L, n)
    out = offset + basis @ params
    return float(out[0]) if np.ndim(x) == 0 else out


def entropy_slope(model: ModelId | str, x: float, params) -> float:
    """``dg/dx`` of an entropy model (F models map to their G partner)."""
    model = ModelId.parse(model)
    c = float(np.atleast_1d(params)[0])
    if model in (ModelId.G2D, ModelId.F2D):
        return c * math.pi / math.tan(math.pi * x)
    if model in (ModelId.GRVB, ModelId.FRVB):
        return -2.0 * c * rvb_log_ratio_dx(x)
    if model in (ModelId.GADS, ModelId.FADS):
        return c * ads_entropy_shape_dx(x)
    raise ValueError(f"no entropy slope for {model.value}")


def _second_derivative(fn, x, h):
    return (-fn(x + 2 * h) + 16 * fn(x + h) - 30 * fn(x) + 16 * fn(x - h) - fn(x - 2 * h)) / (12 * h * h)


def systematics_third_derivative(model: ModelId | str, x: float, params, L: int | None = None,
                                 n: int = 2) -> float:
    """Third x-derivative of the profile used for the discretisation error.

    For ``Fit2D_corrected`` the fitted curve itself is differentiated; the
    other models use the entropy form (``g`` for the G/F pairs, the
    ``log sin`` entropy for the CFT curves).
    """
    model = ModelId.parse(model)
    params = _check_params(model, params)
    px = math.pi * x
    s, co = math.sin(px), math.cos(px)
    pi3 = math.pi ** 3
    if model is ModelId.FIT2D_CORRECTED:
        k = params[0]
        csc2 = 1.0 / (s * s)
        cot = co / s
        return pi3 * s / 16.0 - k / (2.0 * L) * 2.0 * pi3 * (2.0 * csc2 * cot * cot + csc2 * csc2)
    if model is ModelId.CFT2D_CYLINDER:
        a = params[0] * (1.0 + 1.0 / n) / 6.0
        return a * 2.0 * pi3 * co / s ** 3
    if model is ModelId.CFT2D_PLANE:
        a = params[0] * (1.0 + 1.0 / n) / 6.0
        return 2.0 * a / x ** 3
    if model in (ModelId.G2D, ModelId.F2D):
        return params[0] * 2.0 * pi3 * co / s ** 3
    h = 0.01 * min(x, 1.0 - x)
    return _second_derivative(lambda v: entropy_slope(model, v, params[:1]), x, h)

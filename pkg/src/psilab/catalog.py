"""Catalog of model symbol families.

Every family has the semiclassical form ``q(t, X) = Lambda * F(t, X / l)``
with ``l = ell0 * Lambda^{1/2}``, so its seminorms in ``S(Lambda,
Lambda^{-1} Gamma)`` do not depend on ``Lambda``.  All families carry a
smooth cutoff in ``X`` and in ``t`` (equal to 1 for ``|t| <= 1/2``, zero for
``|t| >= 1``) chosen so that the sign rule holds for all times.
"""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, PsiConditionError
from .grid import PhaseGrid, SymbolFamily, TimeGrid, validate_psi

DEFAULT_ELL0 = 4.0


def _h(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u):
    """C-infinity step: 0 for ``u <= 0``, 1 for ``u >= 1``."""
    a, b = _h(u), _h(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def plateau(r, r1: float, r2: float):
    """1 for ``r <= r1``, 0 for ``r >= r2``, smooth and monotone in between."""
    return smooth_step((r2 - np.asarray(r, dtype=float)) / (r2 - r1))


def time_cutoff(t):
    return plateau(np.abs(t), 0.5, 1.0)


def bump(r):
    """Radial profile equal to 1 only at the origin and vanishing for ``r >= 1``.

    The transition spans the whole unit interval, which keeps the second
    derivatives (and hence the slow-variation constants) of the families small.
    """
    return plateau(r, 0.0, 1.0)


def _scaled(X, XI, Lambda, ell0):
    ell = ell0 * math.sqrt(Lambda)
    return X / ell, XI / ell


def _zero(Lambda, p):
    def q(t, X, XI):
        return np.zeros(np.broadcast(X, XI).shape)
    return q


def _gradient_model(Lambda, p):
    ell0 = p["ell0"]

    def q(t, X, XI):
        y1, y2 = _scaled(X, XI, Lambda, ell0)
        return time_cutoff(t) * math.sqrt(Lambda) * X * bump(np.hypot(y1, y2))
    return q


def _product_monotone(Lambda, p):
    ell0, amp = p["ell0"], p["amp"]

    def q(t, X, XI):
        y1, y2 = _scaled(X, XI, Lambda, ell0)
        b = (1.0 + 0.5 * y1) * bump(np.hypot(y1, y2))
        return Lambda * amp * t * time_cutoff(t) * b
    return q


def _shifted_sum(Lambda, p):
    ell0, slope, offset = p["ell0"], p["slope"], p["offset"]
    if not (abs(slope) + abs(offset) < 0.5):
        raise ConfigError("shifted_sum needs |slope| + |offset| < 1/2 for the sign rule")

    def q(t, X, XI):
        y1, y2 = _scaled(X, XI, Lambda, ell0)
        b = slope * y1 - offset
        return Lambda * time_cutoff(t) * bump(np.hypot(y1, y2)) * (t + b)
    return q


def _a4_model(Lambda, p):
    ell0 = p["ell0"]

    def q(t, X, XI):
        y1, y2 = _scaled(X, XI, Lambda, ell0)
        return Lambda * t * time_cutoff(t) * bump(np.hypot(y1, y2))
    return q


_FAMILIES = {
    "zero": (_zero, {}, "q = 0"),
    "gradient_model": (_gradient_model, {"ell0": DEFAULT_ELL0},
                       "q = Lambda^(1/2) x cut(X/l), time independent"),
    "product_monotone": (_product_monotone, {"ell0": DEFAULT_ELL0, "amp": 1.0},
                         "q = Lambda t b(X/l), b >= 0"),
    "shifted_sum": (_shifted_sum, {"ell0": DEFAULT_ELL0, "slope": 0.3, "offset": 0.1},
                    "q = Lambda cut(X/l) (t + slope y1 - offset), sign change in t and X"),
    "a4_model": (_a4_model, {"ell0": DEFAULT_ELL0},
                 "b1 = Lambda t bump(X/l) with a0 = 1"),
}

NONTRIVIAL = ("gradient_model", "product_monotone", "shifted_sum", "a4_model")


def catalog_names() -> list:
    return list(_FAMILIES)


def default_params(name: str) -> dict:
    if name not in _FAMILIES:
        raise ConfigError(f"unknown family {name!r}; known: {', '.join(_FAMILIES)}")
    return dict(_FAMILIES[name][1])


def catalog_description(name: str) -> str:
    return _FAMILIES[name][2]


def family_function(name: str, Lambda: float, params: Optional[dict] = None) -> Callable:
    """Exact expression ``q(t, x, xi)`` of a catalog family."""
    if name not in _FAMILIES:
        raise ConfigError(f"unknown family {name!r}; known: {', '.join(_FAMILIES)}")
    builder, defaults, _ = _FAMILIES[name]
    p = dict(defaults)
    for k, v in (params or {}).items():
        if k not in defaults:
            raise ConfigError(f"family {name!r} has no parameter {k!r}")
        p[k] = float(v)
    return builder(float(Lambda), p), p


def catalog(name: str, params: Optional[dict], grid: PhaseGrid, timegrid: TimeGrid,
            validate: bool = True) -> SymbolFamily:
    """Sample a catalog family on ``grid`` (whose ``Lambda`` is used) and ``timegrid``.

    Raises ``PsiConditionError`` with a witness when the sampled family breaks
    the sign rule.
    """
    fn, p = family_function(name, grid.Lambda, params)
    fam = SymbolFamily.from_function(timegrid, grid, fn, name=name, params=p)
    if validate:
        entry = validate_psi(fam)
        if not entry.passed:
            raise PsiConditionError(f"family {name!r} violates the sign rule", entry.witness)
    return fam


def a4_pair(params: Optional[dict], grid: PhaseGrid, timegrid: TimeGrid):
    """``(a0, b1)`` for the space-time model: ``a0 = 1`` and the ``a4_model`` family."""
    b1 = catalog("a4_model", params, grid, timegrid)
    a0 = SymbolFamily(timegrid, grid, np.ones((timegrid.M,) + grid.shape), name="a0_one")
    return a0, b1


def scaled_phase_grid(Lambda: float, N: int = 64, ell0: float = DEFAULT_ELL0,
                      extent: float = 1.5) -> PhaseGrid:
    """Square grid of half-width ``extent * ell0 * Lambda^{1/2}``, i.e. fixed in
    the rescaled variable ``X / l``."""
    L = extent * ell0 * math.sqrt(Lambda)
    return PhaseGrid(N, N, L, L, Lambda)


def fitting_ell0(L: float, Lambda: float, margin: float = 1.25) -> float:
    """Largest ``ell0`` whose support (radius ``margin * l``) fits a box of half-width ``L``."""
    return L / (margin * math.sqrt(Lambda))

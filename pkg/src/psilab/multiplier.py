"""The time multiplier m = delta0 + Theta + delta0 eta / T and its checks.

Time recurrences act on axis 0 of ``(M, N_x, N_xi)`` stacks, independently
at each phase point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import GridError
from .geometry import GeometryFields, fit_C0, lipschitz_constant
from .grid import BAND, PhaseGrid, TimeGrid, gradient_norm, hessian_norm
from .quantize import gaussian_smooth
from .report import CheckEntry

# Slack constant of the discrete checks.  Calibrated on the q = 0 fixture,
# where every deficit is pure round-off (below 1e-15), and frozen with a
# wide margin.
C_H = 1e-9


@dataclass
class MultiplierFields:
    T: float
    time: TimeGrid
    grid: PhaseGrid
    Lambda: float
    omega: np.ndarray
    sigma1: np.ndarray
    eta: np.ndarray
    rho1: np.ndarray
    theta: np.ndarray
    m: np.ndarray
    D: np.ndarray

    def slack(self, C: float = C_H) -> float:
        return C * (self.time.dt + self.grid.dx + self.grid.dxi)


# ---------------------------------------------------------------- recurrences

def rho1_separable(omega: np.ndarray, sigma1: np.ndarray) -> np.ndarray:
    """``min_{j<=k} (omega - sigma1)_j + min_{l>=k} (omega + sigma1)_l``."""
    a = omega - sigma1
    b = omega + sigma1
    left = np.minimum.accumulate(a, axis=0)
    right = np.minimum.accumulate(b[::-1], axis=0)[::-1]
    return left + right


def rho1_bruteforce(omega: np.ndarray, sigma1: np.ndarray) -> np.ndarray:
    """Triple-range infimum evaluated pair by pair, O(M^2)."""
    a = omega - sigma1
    b = omega + sigma1
    M = len(omega)
    out = np.full(omega.shape, np.inf)
    for k in range(M):
        for j in range(k + 1):
            for l in range(k, M):
                out[k] = np.minimum(out[k], a[j] + b[l])
    return out


def cumulative_upper(rho: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative integral with ``dt * max(rho_j, rho_{j+1})`` per step."""
    steps = dt * np.maximum(rho[1:], rho[:-1])
    out = np.zeros_like(rho)
    out[1:] = np.cumsum(steps, axis=0)
    return out


def theta_running_max(sigma1: np.ndarray, rho1: np.ndarray, dt: float, T: float) -> np.ndarray:
    """``Theta_k = max_{j<=k} (sigma1_j - rho1_j - I_j/2T) + (I_k/2T - sigma1_k)``."""
    I = cumulative_upper(rho1, dt) / (2.0 * T)
    g = sigma1 - rho1 - I
    return np.maximum.accumulate(g, axis=0) + (I - sigma1)


def theta_bruteforce(sigma1: np.ndarray, rho1: np.ndarray, dt: float, T: float) -> np.ndarray:
    """Supremum over every start node ``j <= k``, same grouping as the recurrence."""
    I = cumulative_upper(rho1, dt) / (2.0 * T)
    M = len(sigma1)
    out = np.full(sigma1.shape, -np.inf)
    for k in range(M):
        for j in range(k + 1):
            out[k] = np.maximum(out[k], sigma1[j] - rho1[j] - I[j])
        out[k] = out[k] + (I[k] - sigma1[k])
    return out


def eta_integral(d0: np.ndarray, dt: float, T: float, Lambda: float,
                 rule: str = "split") -> np.ndarray:
    """``Lambda^{-1/2} int_{-T}^t delta0 ds + 2T``.

    ``rule="split"`` takes the positive part of ``delta0`` from the right end
    of each step and the negative part from the left end.  Since ``delta0``
    is nondecreasing in time, this keeps the discrete product inequality
    ``d/dt (delta0 eta) >= delta0^2 Lambda^{-1/2}`` exact.  ``rule="trapezoid"``
    is the plain trapezoid sum.
    """
    if rule == "split":
        w = np.maximum(d0[1:], 0.0) + np.minimum(d0[:-1], 0.0)
    elif rule == "trapezoid":
        w = 0.5 * (d0[1:] + d0[:-1])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    out = np.full(d0.shape, 2.0 * T)
    out[1:] += np.cumsum(dt * w, axis=0) / math.sqrt(Lambda)
    return out


# ---------------------------------------------------------------- construction

def build_multiplier(geom: GeometryFields, T: Optional[float] = None,
                     eta_rule: str = "split") -> MultiplierFields:
    """Assemble the multiplier on the nodes of ``geom`` lying in ``[-T, T]``.

    The time grid of ``geom`` must be symmetric and cover ``[-T, T]``; nodes
    outside the window are dropped.
    """
    tg = geom.q.time
    if T is None:
        T = tg.T
    if T > tg.T * (1 + 1e-12):
        raise GridError(f"T = {T} exceeds the time grid half-width {tg.T}")
    keep = np.abs(tg.nodes) <= T * (1 + 1e-12)
    if keep.sum() < 3:
        raise GridError("fewer than three time nodes in [-T, T]")
    if not math.isclose(tg.nodes[keep][0], -T, rel_tol=1e-9, abs_tol=1e-12):
        raise GridError("the time window must start on a node")
    sub = TimeGrid(T, int(keep.sum()))
    d0 = geom.delta0[keep]
    nu = geom.nu[keep]
    Lam = geom.Lambda
    D = np.sqrt(1.0 + d0 ** 2)
    omega = D / np.sqrt(nu)
    sigma1 = d0
    rho1 = rho1_separable(omega, sigma1)
    theta = theta_running_max(sigma1, rho1, sub.dt, T)
    eta = eta_integral(d0, sub.dt, T, Lam, eta_rule)
    m = sigma1 + theta + d0 * eta / T
    return MultiplierFields(T, sub, geom.grid, Lam, omega, sigma1, eta, rho1, theta, m, D)


def closed_form_zero(T: float, M: int):
    """``(rho1, Theta, m)`` for ``q = 0``: ``2``, ``(t+T)/T - 2`` and ``Theta``."""
    t = TimeGrid(T, M).nodes
    theta = (t + T) / T - 2.0
    return np.full(M, 2.0), theta, theta


# ---------------------------------------------------------------- checks

def _ddt(f: np.ndarray, dt: float) -> np.ndarray:
    """Symmetric difference at interior nodes (shape ``M-2``)."""
    return (f[2:] - f[:-2]) / (2.0 * dt)


def _entry(name: str, ref: str, deficit: np.ndarray, eps: float, interior: np.ndarray,
           time_offset: int = 0) -> CheckEntry:
    """``deficit`` must be ``<= eps`` on the interior mask; margin is ``-max deficit``."""
    d = np.where(interior, deficit, -np.inf)
    k = np.unravel_index(int(np.argmax(d)), d.shape)
    worst = float(d[k])
    wit = {"node": [int(k[0]) + time_offset] + [int(v) for v in k[1:]], "deficit": worst}
    return CheckEntry(name, ref, margin=-worst, tolerance=eps, passed=worst <= eps, witness=wit)


def check_thm_245(mf: MultiplierFields, geom: GeometryFields, C0: Optional[float] = None,
                  C_h: float = C_H) -> list:
    """Discrete form of the four multiplier inequalities at interior nodes.

    ``C0`` defaults to an exhaustive fit over the geometry of ``geom``.
    Returns entries for (a) to (d).
    """
    if C0 is None:
        C0 = fit_C0(geom, n_samples=None)[0]
    M = mf.time.M
    dt = mf.time.dt
    eps = mf.slack(C_h)
    keep = np.abs(geom.q.time.nodes) <= mf.T * (1 + 1e-12)
    R = geom.R()[keep]
    Lam = mf.Lambda
    sq = math.sqrt(Lam)
    inner2 = mf.grid.interior(BAND)
    full = np.broadcast_to(inner2, (M,) + mf.grid.shape)
    mid = full[1:-1]
    rnd = 1e-12 * max(1.0, float(np.abs(mf.rho1).max()), float(np.abs(mf.m).max()))

    # (a)
    a1 = np.abs(mf.theta) - mf.rho1
    a2 = mf.rho1 - 2.0 * mf.omega
    ea = _entry("multiplier_a", "|Theta| <= rho1 <= 2 <delta0> nu^-1/2",
                np.maximum(a1, a2) - rnd, eps, full)
    # (b)
    drift = 2.0 * mf.T * _ddt(mf.theta + mf.sigma1, dt)
    b1 = R / C0 - mf.rho1
    b2 = mf.rho1[1:-1] - drift
    eb = _entry("multiplier_b", "C0^-1 R <= rho1 <= 2T d/dt (Theta + sigma1)",
                np.maximum(b1[1:-1], b2) - rnd, eps, mid, 1)
    # (c)
    c1 = np.maximum(-mf.eta, mf.eta - 4.0 * mf.T)[1:-1]
    c2 = mf.sigma1[1:-1] ** 2 / sq - _ddt(mf.sigma1 * mf.eta, dt)
    lip = np.array([lipschitz_constant(e, mf.grid) for e in mf.eta])
    c3 = np.broadcast_to((lip - 4.0 * mf.T / sq)[:, None, None], mf.eta.shape)[1:-1]
    ec = _entry("multiplier_c", "0 <= eta <= 4T, d/dt(delta0 eta) >= delta0^2 Lambda^-1/2, "
                "|eta'| <= 4T Lambda^-1/2", np.maximum(np.maximum(c1, c2), c3) - rnd, eps, mid, 1)
    ec.witness.update({"eta_lipschitz_max": float(lip.max()), "bound": 4.0 * mf.T / sq})
    # (d)
    lhs = mf.T * _ddt(mf.m, dt)
    rhs = mf.D[1:-1] ** 2 / (2 ** 1.5 * C0 * sq)
    ed = _entry("multiplier_d", "T dm/dt >= (2^{3/2} C0)^-1 <delta0>^2 Lambda^-1/2",
                rhs - lhs - rnd, eps, mid, 1)
    for e in (ea, eb, ec, ed):
        e.witness["C0"] = C0
        e.witness["eps_h"] = eps
    return [ea, eb, ec, ed]


def quasi_convexity_defect(rho1: np.ndarray, sigma1: np.ndarray, C1: float = 2.0) -> float:
    """Max of ``rho1(t2) - C1 max(rho1(t1), rho1(t3)) - sigma1(t3) + sigma1(t1)``."""
    M = len(rho1)
    worst = -np.inf
    for i in range(M):
        for j in range(i, M):
            for k in range(j, M):
                d = rho1[j] - C1 * np.maximum(rho1[i], rho1[k]) - sigma1[k] + sigma1[i]
                worst = max(worst, float(np.max(d)))
    return worst


def certify_with_halving(family_at: Callable, T0: float = 0.25, T_min: float = 2.0 ** -8,
                         geometry: Callable = None, **kw):
    """Halve ``T`` from ``T0`` until check (d) passes.

    ``family_at(T)`` must return a validated family on a time grid over
    ``[-T, T]``; ``geometry`` maps a family to its ``GeometryFields``.
    Returns ``(T, multiplier, geometry, entries)``; the last attempt is
    returned when ``T`` would drop below ``T_min``.
    """
    if geometry is None:
        from .geometry import geometry_fields as geometry
    T = T0
    while True:
        geom = geometry(family_at(T))
        mf = build_multiplier(geom, T, **kw)
        entries = check_thm_245(mf, geom)
        if entries[3].passed or T / 2 < T_min:
            return T, mf, geom, entries
        T /= 2


# ---------------------------------------------------------------- smoothing

def smoothed_fields(mf: MultiplierFields, geom: Optional[GeometryFields] = None,
                    C_max: float = 100.0):
    """Gaussian (Wick) smoothing of the multiplier ingredients and measured constants.

    Returns ``(fields, constants, entry)``.  Constants are the grid maxima of
    the ratios in the three bounds on ``conv = (delta0 (1 + eta/T)) * G``
    and of the companion ratios for ``Theta``, ``delta0``, ``delta0'``,
    ``eta/T`` and ``eta'/T``.
    """
    g = mf.grid
    inner = g.interior(BAND + 2)
    d0 = mf.sigma1
    D = mf.D
    nu = geom.nu[np.abs(geom.q.time.nodes) <= mf.T * (1 + 1e-12)] if geom is not None \
        else D ** 2 / mf.omega ** 2
    w_theta = D / np.sqrt(nu)
    d0p = gradient_norm(d0, g)
    etap = gradient_norm(mf.eta, g) / mf.T
    fields = {
        "theta": gaussian_smooth(mf.theta, g),
        "delta0": gaussian_smooth(d0, g),
        "delta0_prime": gaussian_smooth(d0p, g),
        "eta_over_T": gaussian_smooth(mf.eta / mf.T, g),
        "eta_prime_over_T": gaussian_smooth(etap, g),
        "conv": gaussian_smooth(d0 * (1.0 + mf.eta / mf.T), g),
    }
    conv = fields["conv"]
    cp = gradient_norm(conv, g)
    cpp = hessian_norm(conv, g)
    sq = math.sqrt(mf.Lambda)

    def cmax(x):
        return float(np.max(x[:, inner]))
    consts = {
        "theta": cmax(np.abs(fields["theta"]) / w_theta),
        "delta0": cmax(np.abs(fields["delta0"]) / D),
        "delta0_prime": cmax(np.abs(fields["delta0_prime"])),
        "eta_over_T": cmax(np.abs(fields["eta_over_T"])),
        "eta_prime_over_T": cmax(np.abs(fields["eta_prime_over_T"]) * sq),
        "conv": cmax(np.abs(conv) / D),
        "conv_prime": cmax(cp),
        "conv_second": cmax(cpp / w_theta),
    }
    worst = max(consts.values())
    ok = math.isfinite(worst) and worst <= C_max
    entry = CheckEntry("smoothed_bounds", "Gaussian-smoothed multiplier bounds",
                       margin=C_max - worst, tolerance=0.0, passed=ok, witness=consts)
    return fields, consts, entry

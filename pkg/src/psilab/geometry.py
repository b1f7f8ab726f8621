"""Sign regions, truncated signed distance, the weights mu and nu, point
classification, partitions of unity and the C0 fit of the symbol inequality."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import distance_transform_edt

from .catalog import plateau
from .errors import HypothesisError
from .grid import (PhaseGrid, SymbolFamily, default_tol, gradient_norm, hessian_norm,
                   proper_weight_lambda, _check_resolution)
from .report import CheckEntry

E_PLUS, E_MINUS, E_GRAD, E_NEGL = 1, 2, 3, 4
LABEL_NAMES = {E_PLUS: "E_plus", E_MINUS: "E_minus", E_GRAD: "E_grad", E_NEGL: "E_negl"}


@dataclass
class SignRegions:
    plus: np.ndarray
    minus: np.ndarray
    zero: np.ndarray
    tol: float

    @property
    def Xplus(self):
        return self.plus

    @property
    def Xminus(self):
        return self.minus

    @property
    def Xzero(self):
        return self.zero


@dataclass
class GeometryFields:
    q: SymbolFamily
    regions: SignRegions
    delta0: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    lambda_proper: np.ndarray
    grad: np.ndarray   # |Lambda^{1/2} q'|
    hess: np.ndarray   # Lambda^{1/2} |q''|

    @property
    def grid(self) -> PhaseGrid:
        return self.q.grid

    @property
    def Lambda(self) -> float:
        return self.q.Lambda

    @property
    def D(self) -> np.ndarray:
        return np.sqrt(1.0 + self.delta0 ** 2)

    def R(self) -> np.ndarray:
        """``Lambda^{-1/2} mu^{1/2} nu^{-1/2} <delta0>``."""
        return self.mu ** 0.5 / (self.nu ** 0.5 * math.sqrt(self.Lambda)) * self.D


@dataclass
class PointClassification:
    labels: np.ndarray
    r1: float

    def count(self, label: int) -> int:
        return int(np.sum(self.labels == label))


def sign_partition(q: SymbolFamily, tol: Optional[float] = None) -> SignRegions:
    """``X+(t)`` collects points positive at some earlier time, ``X-(t)``
    points negative at some later time."""
    if not q.psi_validated:
        raise HypothesisError("sign_partition needs a family that passed validate_psi")
    if tol is None:
        tol = default_tol(q.Lambda)
    v = q.values
    plus = np.logical_or.accumulate(v > tol, axis=0)
    minus = np.logical_or.accumulate((v < -tol)[::-1], axis=0)[::-1]
    zero = ~(plus | minus)
    return SignRegions(plus, minus, zero, tol)


def truncated_distance(mask: np.ndarray, grid: PhaseGrid, kappa: float) -> np.ndarray:
    """``min(dist(X, A), kappa)`` with ``A`` the True nodes; ``kappa`` if ``A`` is empty."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.full(mask.shape, float(kappa))
    d = distance_transform_edt(~mask, sampling=(grid.dx, grid.dxi))
    return np.minimum(d, kappa)


def delta0(regions: SignRegions, grid: PhaseGrid, Lambda: Optional[float] = None) -> np.ndarray:
    """Truncated signed distance ``Psi_{X-} - Psi_{X+}`` with ``kappa = Lambda^{1/2}``."""
    kappa = math.sqrt(grid.Lambda if Lambda is None else Lambda)
    out = np.empty(regions.plus.shape)
    for k in range(out.shape[0]):
        out[k] = (truncated_distance(regions.minus[k], grid, kappa)
                  - truncated_distance(regions.plus[k], grid, kappa))
    return out


def _derivs(q: SymbolFamily):
    _check_resolution(q.grid)
    s = math.sqrt(q.Lambda)
    return s * gradient_norm(q.values, q.grid), s * hessian_norm(q.values, q.grid)


def mu_weight(q: SymbolFamily, d0: np.ndarray, grad=None, hess=None) -> np.ndarray:
    """``<delta0>^2 + |Lambda^{1/2} q'| + |Lambda^{1/2} q''|^2``."""
    if grad is None or hess is None:
        grad, hess = _derivs(q)
    return 1.0 + d0 ** 2 + grad + hess ** 2


def nu_weight(q: SymbolFamily, mu: np.ndarray, d0: np.ndarray, grad=None) -> np.ndarray:
    """``<delta0>^2 + |Lambda^{1/2} q'|^2 / mu``."""
    if grad is None:
        grad, _ = _derivs(q)
    return 1.0 + d0 ** 2 + grad ** 2 / mu


def geometry_fields(q: SymbolFamily, tol: Optional[float] = None, m: float = 1.0) -> GeometryFields:
    regions = sign_partition(q, tol)
    d0 = delta0(regions, q.grid)
    grad, hess = _derivs(q)
    mu = mu_weight(q, d0, grad, hess)
    nu = nu_weight(q, mu, d0, grad)
    lam = proper_weight_lambda(q, m)
    return GeometryFields(q, regions, d0, mu, nu, lam, grad, hess)


def classify_points(fields: GeometryFields, r1: float = 0.25) -> PointClassification:
    """Labels: nonnegative, nonpositive, gradient, negligible (checked in that order)."""
    if not (0 < r1 <= 0.5):
        raise ValueError("r1 must lie in (0, 1/2]")
    d0, nu, mu = fields.delta0, fields.nu, fields.mu
    g2 = fields.grad ** 2 / mu
    small = d0 ** 2 < r1 ** 2 * nu
    labels = np.full(d0.shape, E_NEGL, dtype=np.int8)
    labels[small & (g2 >= nu / 4)] = E_GRAD
    labels[d0 <= -r1 * np.sqrt(nu)] = E_MINUS
    labels[d0 >= r1 * np.sqrt(nu)] = E_PLUS
    return PointClassification(labels, r1)


# ---------------------------------------------------------------- checks

def check_inclusion_chain(fields: GeometryFields) -> CheckEntry:
    """``{q>tol} c X+ c {d0>0} c {d0>=0} c {q>=-tol}`` and the mirrored chain,
    plus ``|q| <= tol`` wherever ``d0 = 0``."""
    q, reg, d0, tol = fields.q.values, fields.regions, fields.delta0, fields.regions.tol
    violations = 0
    pairs = [
        (q > tol, reg.plus), (reg.plus, d0 > 0), (d0 > 0, d0 >= 0), (d0 >= 0, q >= -tol),
        (q < -tol, reg.minus), (reg.minus, d0 < 0), (d0 < 0, d0 <= 0), (d0 <= 0, q <= tol),
        (d0 == 0, np.abs(q) <= tol),
        (reg.plus & reg.minus, np.zeros_like(reg.plus)),
    ]
    witness = None
    for k, (a, b) in enumerate(pairs):
        bad = a & ~b
        n = int(bad.sum())
        if n and witness is None:
            witness = {"link": k, "index": [int(v) for v in np.argwhere(bad)[0]]}
        violations += n
    return CheckEntry("inclusion_chain", "sign regions and signed distance", margin=-float(violations),
                      tolerance=0.0, passed=violations == 0, witness=witness)


def lipschitz_constant(field2d: np.ndarray, grid: PhaseGrid) -> float:
    """Max difference quotient over adjacent pairs (axis and diagonal neighbors)."""
    f = np.asarray(field2d)
    hx, hy = grid.dx, grid.dxi
    hd = math.hypot(hx, hy)
    q = [np.abs(np.diff(f, axis=-2)) / hx, np.abs(np.diff(f, axis=-1)) / hy,
         np.abs(f[..., 1:, 1:] - f[..., :-1, :-1]) / hd,
         np.abs(f[..., 1:, :-1] - f[..., :-1, 1:]) / hd]
    return float(max(a.max() for a in q))


def check_lipschitz(fields: GeometryFields) -> CheckEntry:
    g = fields.grid
    h = max(g.dx, g.dxi)
    L = lipschitz_constant(fields.delta0, g)
    bound = 2.0 + 10.0 * h
    return CheckEntry("delta0_lipschitz", "signed distance is 2-Lipschitz", margin=bound - L,
                      tolerance=10.0 * h, passed=L <= bound, witness={"lipschitz": L})


def check_delta0_monotone(fields: GeometryFields) -> CheckEntry:
    d = np.diff(fields.delta0, axis=0)
    worst = float(d.min()) if d.size else 0.0
    return CheckEntry("delta0_monotone", "signed distance increases in time", margin=worst,
                      tolerance=0.0, passed=worst >= 0)


def weight_constant(fields: GeometryFields) -> float:
    """Smallest ``C >= 2`` with ``2 mu <= C Lambda`` (``mu >= 1`` forces ``C >= 2`` at Lambda = 1)."""
    return max(2.0, float(np.max(2.0 * fields.mu) / fields.Lambda))


def check_weight_order(fields: GeometryFields) -> CheckEntry:
    ratio = fields.nu / fields.mu
    worst = float(ratio.max())
    ok = bool(np.all(ratio > 0)) and worst <= 2.0
    return CheckEntry("nu_le_2mu", "nu <= 2 mu <= C Lambda", margin=2.0 - worst, tolerance=0.0,
                      passed=ok, witness={"C": weight_constant(fields), "max_nu_over_mu": worst})


def check_q_bound(fields: GeometryFields) -> dict:
    """Measured constant in ``|Lambda^{1/2} q| <= C mu^{1/2} nu``."""
    val = math.sqrt(fields.Lambda) * np.abs(fields.q.values) / (np.sqrt(fields.mu) * fields.nu)
    return {"C": float(val.max())}


def symbol_rhs_min(fields: GeometryFields, k: int, ix, iy) -> np.ndarray:
    """``min_{t' <= t_k <= t''}`` of the symbol-inequality right-hand side at points ``(ix, iy)``."""
    d0 = fields.delta0[:, ix, iy]
    nu = fields.nu[:, ix, iy]
    om = np.sqrt(1 + d0 ** 2) / np.sqrt(nu)
    left = om[:k + 1] + (d0[k] - d0[:k + 1]) / np.sqrt(nu[:k + 1])
    right = om[k:] + (d0[k:] - d0[k]) / np.sqrt(nu[k:])
    return left.min(axis=0) + right.min(axis=0)


def fit_C0(fields: GeometryFields, n_samples: Optional[int] = 10_000, seed: int = 0,
           stride: int = 1):
    """``C0 = max(1, max R / min RHS)`` over sampled ``(t, X)``, each with its
    worst triple ``t' <= t <= t''``.  ``n_samples=None`` scans every node."""
    M = fields.delta0.shape[0]
    R = fields.R()
    worst, wit = 0.0, None
    if n_samples is None:
        for k in range(M):
            ix, iy = np.meshgrid(np.arange(0, R.shape[1], stride),
                                 np.arange(0, R.shape[2], stride), indexing="ij")
            ix, iy = ix.ravel(), iy.ravel()
            ratio = R[k, ix, iy] / symbol_rhs_min(fields, k, ix, iy)
            j = int(np.argmax(ratio))
            if ratio[j] > worst:
                worst, wit = float(ratio[j]), (k, int(ix[j]), int(iy[j]))
    else:
        rng = np.random.default_rng(seed)
        ks = rng.integers(0, M, n_samples)
        ix = rng.integers(0, R.shape[1], n_samples)
        iy = rng.integers(0, R.shape[2], n_samples)
        for k in np.unique(ks):
            sel = ks == k
            ratio = R[k, ix[sel], iy[sel]] / symbol_rhs_min(fields, int(k), ix[sel], iy[sel])
            j = int(np.argmax(ratio))
            if ratio[j] > worst:
                worst, wit = float(ratio[j]), (int(k), int(ix[sel][j]), int(iy[sel][j]))
    return max(1.0, worst), {"max_ratio": worst, "argmax": wit}


# ---------------------------------------------------------------- partitions

@dataclass
class PartitionOfUnity:
    grid: PhaseGrid
    centers: np.ndarray            # (K, 2)
    radii: np.ndarray              # r0 * nu(X_k)^{1/2}
    windows: list                  # per center: (slice_x, slice_xi)
    chi_local: list
    psi_local: list
    overlap: int
    r0: float

    def __len__(self):
        return len(self.centers)

    def _full(self, k, local):
        out = np.zeros(self.grid.shape)
        out[self.windows[k]] = local[k]
        return out

    def chi(self, k: int) -> np.ndarray:
        return self._full(k, self.chi_local)

    def psi(self, k: int) -> np.ndarray:
        return self._full(k, self.psi_local)

    def chi_sum(self) -> np.ndarray:
        s = np.zeros(self.grid.shape)
        for w, c in zip(self.windows, self.chi_local):
            s[w] += c
        return s


def _window(grid: PhaseGrid, c, rad):
    x, xi = grid.x, grid.xi
    ix = np.searchsorted(x, [c[0] - rad, c[0] + rad])
    iy = np.searchsorted(xi, [c[1] - rad, c[1] + rad])
    return (slice(max(ix[0] - 1, 0), min(ix[1] + 1, grid.N_x)),
            slice(max(iy[0] - 1, 0), min(iy[1] + 1, grid.N_xi)))


def partition_of_unity(nu: np.ndarray, grid: PhaseGrid, r0: float = 0.5) -> PartitionOfUnity:
    """Greedy covering by balls of radius ``r0 nu^{1/2}``.

    Nodes are visited in raster order; an uncovered node becomes a center and
    covers the ball of radius ``(2/3) r0 nu^{1/2}`` on which its bump equals 1.
    ``chi_k = theta_k / sum_j theta_j`` and ``psi_k = 1`` on ``supp chi_k``.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.shape != grid.shape or np.any(nu < 1 - 1e-12):
        raise ValueError("nu must be a grid field with nu >= 1")
    X, XI = grid.mesh()
    covered = np.zeros(grid.shape, dtype=bool)
    centers, radii = [], []
    flat = covered.ravel()
    pos = 0
    while True:
        rest = np.flatnonzero(~flat[pos:])
        if rest.size == 0:
            break
        pos += int(rest[0])
        i, j = divmod(pos, grid.N_xi)
        c = (X[i, j], XI[i, j])
        rad = r0 * math.sqrt(nu[i, j])
        centers.append(c)
        radii.append(rad)
        w = _window(grid, c, rad)
        d = np.hypot(X[w] - c[0], XI[w] - c[1])
        covered[w] |= d <= (2.0 / 3.0) * rad
        if not covered[i, j]:
            covered[i, j] = True
    centers = np.array(centers)
    radii = np.array(radii)
    windows, theta = [], []
    total = np.zeros(grid.shape)
    count = np.zeros(grid.shape, dtype=int)
    for c, rad in zip(centers, radii):
        w = _window(grid, c, rad * 4.0 / 3.0)
        d = np.hypot(X[w] - c[0], XI[w] - c[1]) / rad
        th = plateau(d, 2.0 / 3.0, 1.0)
        windows.append(w)
        theta.append((th, d))
        total[w] += th
        count[w] += th > 0
    if np.any(total <= 0):
        idx = np.argwhere(total <= 0)[0]
        raise HypothesisError(f"partition does not cover node {idx.tolist()}")
    chi_local, psi_local = [], []
    for w, (th, d) in zip(windows, theta):
        chi_local.append(th / total[w])
        psi_local.append(plateau(d, 1.0, 4.0 / 3.0))
    return PartitionOfUnity(grid, centers, radii, windows, chi_local, psi_local,
                            int(count.max()), r0)


# ---------------------------------------------------------------- Beals-Fefferman

@dataclass
class BFResult:
    """Factorization ``F(Q y) = (y1 + alpha(y')) e(y)`` on ``max|y_i| <= rho``.

    ``basis`` is the orthonormal matrix ``Q`` whose first column is the unit
    gradient at the origin.  ``branch`` is ``"factor"`` or ``"distance_bound"``;
    in the latter case only ``info`` is filled.
    """
    branch: str
    rho: float
    t0: float = float("nan")
    basis: Optional[np.ndarray] = None
    nodes: Optional[np.ndarray] = None     # 1-D sample of [-rho, rho]
    alpha: Optional[np.ndarray] = None     # on nodes^(d-1)
    e: Optional[np.ndarray] = None         # on nodes^d, axis 0 is y1
    bounds: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.branch == "factor" and all(self.bounds.get("ok", {}).values())


def _num_grad(F, x0: np.ndarray, h: float) -> np.ndarray:
    d = len(x0)
    g = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        g[i] = (F(x0 + e) - F(x0 - e)) / (2 * h)
    return g


def _hessian_sup(F, d: int, radius: float, n: int = 7) -> float:
    """Max operator norm of a central-difference Hessian over a cube sample."""
    h = max(radius, 1e-3) * 1e-3
    axes = [np.linspace(-radius, radius, n)] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    E = np.eye(d) * h
    worst = 0.0
    f0 = np.array([F(p) for p in pts])
    for p, fp in zip(pts, f0):
        H = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                H[i, j] = H[j, i] = (F(p + E[i] + E[j]) - F(p + E[i] - E[j])
                                     - F(p - E[i] + E[j]) + F(p - E[i] - E[j])) / (4 * h * h)
        worst = max(worst, float(np.abs(np.linalg.eigvalsh(H)).max()))
    return worst


def _basis(g: np.ndarray) -> np.ndarray:
    """Orthonormal matrix with first column ``g / |g|`` (Householder)."""
    d = len(g)
    u = g / np.linalg.norm(g)
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = u - e1
    if np.linalg.norm(v) < 1e-15:
        return np.eye(d)
    v /= np.linalg.norm(v)
    return np.eye(d) - 2.0 * np.outer(v, v)


def _adjacent_lipschitz(values: np.ndarray, h: float) -> float:
    if values.size < 2:
        return 0.0
    return float(max(np.abs(np.diff(values, axis=a)).max() for a in range(values.ndim)) / h)


def beals_fefferman_factor(F, d: int, rho: Optional[float] = None, n: int = 41,
                           hess_bound: Optional[float] = None, xtol: float = 1e-13,
                           align: bool = True) -> BFResult:
    """Factor a real ``C^2`` function near a point where its gradient dominates.

    ``F`` maps a point of ``R^d`` (1-D array) to a float.  The hypotheses are
    ``16|F(0)| < F'(0)^2`` in dimension one and ``64|F(0)| < |F'(0)|^2`` above,
    together with ``|F''| <= 1``; then ``rho = |F'(0)|/4`` (``/32`` when
    ``d > 1``).  A smaller ``rho`` may be passed.  Roots are located with
    ``brentq`` on ``[-5 rho, 5 rho]``; ``e`` is ``F / (y1 + alpha)`` with the
    first derivative used on the zero set.  When the size condition fails, or
    no sign change is bracketed, the distance-bound branch is returned.
    With ``align=False`` the given coordinates are kept (``dF/dy1(0)`` must
    then be positive).
    """
    from scipy.optimize import brentq

    x0 = np.zeros(d)
    F0 = float(F(x0))
    g = _num_grad(F, x0, 1e-6)
    gn = float(np.linalg.norm(g))
    k_size, k_rho = (16.0, 4.0) if d == 1 else (64.0, 32.0)
    rho_max = gn / k_rho
    H = _hessian_sup(F, d, 2 * rho_max if rho_max > 0 else 1.0) if hess_bound is None else hess_bound
    if H > 1.0 + 1e-6:
        raise HypothesisError(f"|F''| = {H:.6g} exceeds 1")
    info = {"F0": F0, "grad_norm": gn, "size_ratio": k_size * abs(F0) / gn ** 2 if gn else math.inf,
            "hess_sup": H}
    if not (k_size * abs(F0) < gn ** 2):
        return BFResult("distance_bound", rho=rho_max, info=info)
    if rho is None:
        rho = rho_max
    elif not (0 < rho <= rho_max * (1 + 1e-12)):
        raise HypothesisError(f"rho must lie in (0, {rho_max:.6g}]")
    if align:
        Q = _basis(g)
    elif g[0] > 0:
        Q = np.eye(d)
    else:
        raise HypothesisError("align=False needs dF/dy1(0) > 0")

    def G(y):
        return float(F(Q @ y))

    nodes = np.linspace(-rho, rho, n)
    h = nodes[1] - nodes[0]
    primes = list(np.ndindex(*(n,) * (d - 1)))
    alpha = np.empty((n,) * (d - 1))
    for idx in primes:
        yp = nodes[list(idx)] if d > 1 else np.zeros(0)

        def f1(s, yp=yp):
            return G(np.concatenate([[s], yp]))
        a, b = -5.0 * rho, 5.0 * rho
        fa, fb = f1(a), f1(b)
        if fa * fb > 0:
            info["no_sign_change_at"] = yp.tolist()
            return BFResult("distance_bound", rho=rho, info=info)
        root = a if fa == 0 else (b if fb == 0 else brentq(f1, a, b, xtol=xtol, rtol=1e-15))
        alpha[idx] = -root
    e = np.empty((n,) * d)
    hd = 1e-6 * rho
    for idx in np.ndindex(*e.shape):
        y = nodes[list(idx)]
        a = alpha[idx[1:]] if d > 1 else alpha[()]
        s = y[0] + a
        if abs(s) > 1e-4 * rho:
            e[idx] = G(y) / s
        else:
            e1 = np.zeros(d)
            e1[0] = hd
            e[idx] = (G(y + e1) - G(y - e1)) / (2 * hd)
    t0 = -float(alpha[(n // 2,) * (d - 1)] if d > 1 else alpha[()])
    if d == 1:
        lo, hi, a_bound = rho, 8 * rho, rho / 2
    else:
        lo, hi, a_bound = 7 * rho, 70 * rho, 5 * rho
    bounds = {
        "alpha_max": float(np.abs(alpha).max()),
        "e_min": float(e.min()), "e_max": float(e.max()),
        "e_lipschitz": _adjacent_lipschitz(e, h),
        "alpha_lipschitz": _adjacent_lipschitz(alpha, h) if d > 1 else 0.0,
    }
    bounds["ok"] = {
        "alpha_range": bounds["alpha_max"] <= a_bound * (1 + 1e-9),
        "e_range": lo * (1 - 1e-9) <= bounds["e_min"] and bounds["e_max"] <= hi * (1 + 1e-9),
        "e_lipschitz": bounds["e_lipschitz"] <= 1.0 + 1e-6,
        "alpha_lipschitz": bounds["alpha_lipschitz"] <= 1.0 + 1e-6,
    }
    return BFResult("factor", rho=rho, t0=t0, basis=Q, nodes=nodes, alpha=alpha, e=e,
                    bounds=bounds, info=info)


def rescaled_at(fields: GeometryFields, k: int, i: int, j: int):
    """``T -> Lambda^{1/2} q(t, Y + nu^{1/2} T) mu^{-1/2} nu^{-1}`` at grid node ``(t_k, Y)``.

    Needs a family carrying its exact evaluator.
    """
    q = fields.q
    if q.evaluator is None:
        raise HypothesisError("rescaling needs a family with an exact evaluator")
    t = float(q.time.nodes[k])
    Y = np.array([q.grid.x[i], q.grid.xi[j]])
    nu, mu = float(fields.nu[k, i, j]), float(fields.mu[k, i, j])
    c = math.sqrt(fields.Lambda) / (math.sqrt(mu) * nu)
    s = math.sqrt(nu)

    def F(T):
        X = Y + s * np.asarray(T)
        return c * float(q.evaluator(t, X[0], X[1]))
    return F


def check_gradient_points(fields: GeometryFields, r1: float = 0.25, n_points: int = 10,
                          seed: int = 0, n: int = 9) -> CheckEntry:
    """Run the factorization on the rescaled symbol at sampled gradient points.

    The rescaled function is divided by ``max(1, sup|F''|)`` so that the
    second-derivative hypothesis holds.  At points taking the factor branch,
    ``e`` must stay above ``7 rho`` with ``rho >= |F'(0)|/32``; points whose
    size condition fails take the distance-bound branch and are counted.
    """
    labels = classify_points(fields, r1).labels
    idx = np.argwhere(labels == E_GRAD)
    if len(idx) == 0:
        return CheckEntry("gradient_point_factorization", "factorization near gradient points",
                          margin=0.0, tolerance=0.0, passed=True, witness={"points": 0})
    rng = np.random.default_rng(seed)
    pick = idx[rng.choice(len(idx), size=min(n_points, len(idx)), replace=False)]
    worst, n_factor, n_dist, wit = math.inf, 0, 0, None
    for k, i, j in pick:
        F = rescaled_at(fields, int(k), int(i), int(j))
        g = float(np.linalg.norm(_num_grad(F, np.zeros(2), 1e-6)))
        scale = max(1.0, _hessian_sup(F, 2, max(g / 16, 1e-3)))

        def Fs(T, F=F, scale=scale):
            return F(T) / scale
        res = beals_fefferman_factor(Fs, 2, n=n, hess_bound=1.0)
        if res.branch == "factor":
            n_factor += 1
            m = res.bounds["e_min"] / (7 * res.rho) - 1.0
            if not res.passed:
                m = min(m, -1.0)
            if m < worst:
                worst, wit = m, {"node": [int(k), int(i), int(j)], "rho": res.rho,
                                 "e_min": res.bounds["e_min"], "scale": scale}
        else:
            n_dist += 1
    if n_factor == 0:
        worst, wit = 0.0, {}
    wit = dict(wit or {}, points=len(pick), factor=n_factor, distance_bound=n_dist)
    return CheckEntry("gradient_point_factorization", "factorization near gradient points",
                      margin=worst, tolerance=0.0, passed=worst >= 0, witness=wit)

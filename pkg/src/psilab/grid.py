"""Phase-space grids, sampled symbols, finite differences and weight validators.

Conventions
-----------
Phase points are ``X = (x, xi)`` with ``n = 1``.  Arrays are indexed
``[..., i_x, i_xi]`` so a time stack has shape ``(M, N_x, N_xi)``.  The
quadratic form used for distances is the identity on grid coordinates.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import GridError, ResolutionError
from .report import CheckEntry

# 5-point stencils (interior central, two one-sided rows at each end)
_D1_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_CENTRAL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D1_EDGE = (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
            np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0)
_D2_EDGE = (np.array([35.0, -104.0, 114.0, -56.0, 11.0]) / 12.0,
            np.array([11.0, -20.0, 6.0, 4.0, -1.0]) / 12.0)

BAND = 2  # boundary rows computed with one-sided stencils
N_DIRECTIONS = 32


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid on the box ``[-L_x, L_x) x [-L_xi, L_xi)``.

    Nodes are ``x_i = -L_x + i*dx`` with ``dx = 2 L_x / N_x`` (same for xi).
    """

    N_x: int
    N_xi: int
    L_x: float
    L_xi: float
    Lambda: float = 1.0
    n: int = 1

    def __post_init__(self):
        if self.n != 1:
            raise GridError("only n = 1 phase grids are supported")
        if int(self.N_x) != self.N_x or int(self.N_xi) != self.N_xi:
            raise GridError("point counts must be integers")
        if self.N_x < 5 or self.N_xi < 5:
            raise GridError("need at least 5 points per axis")
        if not (self.L_x > 0 and self.L_xi > 0):
            raise GridError("half-widths must be positive")
        if not self.Lambda >= 1:
            raise GridError("Lambda must be >= 1")

    @property
    def dx(self) -> float:
        return 2.0 * self.L_x / self.N_x

    @property
    def dxi(self) -> float:
        return 2.0 * self.L_xi / self.N_xi

    @property
    def shape(self) -> tuple:
        return (self.N_x, self.N_xi)

    @property
    def x(self) -> np.ndarray:
        return -self.L_x + self.dx * np.arange(self.N_x)

    @property
    def xi(self) -> np.ndarray:
        return -self.L_xi + self.dxi * np.arange(self.N_xi)

    def mesh(self):
        return np.meshgrid(self.x, self.xi, indexing="ij")

    def with_lambda(self, Lambda: float) -> "PhaseGrid":
        return PhaseGrid(self.N_x, self.N_xi, self.L_x, self.L_xi, Lambda, self.n)

    def resolves(self) -> bool:
        """Resolution precondition for derivatives of Lambda-scaled symbols."""
        h = 0.25 * math.sqrt(self.Lambda)
        return self.dx <= h and self.dxi <= h

    def interior(self, band: int = BAND) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[band:self.N_x - band, band:self.N_xi - band] = True
        return mask

    def to_dict(self) -> dict:
        return {"N_x": self.N_x, "N_xi": self.N_xi, "L_x": self.L_x,
                "L_xi": self.L_xi, "Lambda": self.Lambda}


@dataclass(frozen=True)
class TimeGrid:
    """``M`` uniform nodes spanning ``[-T, T]``."""

    T: float
    M: int

    def __post_init__(self):
        if not (0 < self.T <= 1):
            raise GridError("time half-width must satisfy 0 < T <= 1")
        if int(self.M) != self.M or self.M < 2:
            raise GridError("need at least two time nodes")

    @property
    def dt(self) -> float:
        return 2.0 * self.T / (self.M - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.M)


class SampledSymbol:
    """Values of a symbol on the nodes of a :class:`PhaseGrid`."""

    def __init__(self, grid: PhaseGrid, values):
        values = np.asarray(values)
        if values.shape != grid.shape:
            raise GridError(f"values have shape {values.shape}, grid expects {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("symbol values must be finite")
        if np.iscomplexobj(values):
            values = values.astype(complex)
        else:
            values = values.astype(float)
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    @classmethod
    def from_function(cls, grid: PhaseGrid, fn: Callable) -> "SampledSymbol":
        X, XI = grid.mesh()
        return cls(grid, np.broadcast_to(fn(X, XI), grid.shape))

    def __repr__(self):
        kind = "real" if self.is_real else "complex"
        return f"SampledSymbol({kind}, grid={self.grid})"


class SymbolFamily:
    """Time-indexed symbol ``q(t, X)`` sampled on a time grid and a phase grid.

    ``evaluator(t, x, xi)`` optionally gives the exact expression, which is
    used where off-grid values are needed.
    """

    def __init__(self, time: TimeGrid, grid: PhaseGrid, values, name: str = "",
                 params: Optional[dict] = None, evaluator: Optional[Callable] = None):
        values = np.asarray(values)
        if values.shape != (time.M,) + grid.shape:
            raise GridError("family values must have shape (M, N_x, N_xi)")
        if not np.all(np.isfinite(values)):
            raise ValueError("family values must be finite")
        values = values.astype(complex if np.iscomplexobj(values) else float)
        values.setflags(write=False)
        self.time = time
        self.grid = grid
        self.values = values
        self.name = name
        self.params = dict(params or {})
        self.evaluator = evaluator
        self.psi_validated = False

    @property
    def Lambda(self) -> float:
        return self.grid.Lambda

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    @property
    def slices(self) -> list:
        return [SampledSymbol(self.grid, v) for v in self.values]

    def slice(self, k: int) -> SampledSymbol:
        return SampledSymbol(self.grid, self.values[k])

    def scaled(self, factor) -> "SymbolFamily":
        """Pointwise product with a scalar or with a time-independent field."""
        return SymbolFamily(self.time, self.grid, self.values * np.asarray(factor),
                            name=self.name, params=self.params)

    @classmethod
    def from_function(cls, time: TimeGrid, grid: PhaseGrid, fn: Callable, **kw) -> "SymbolFamily":
        X, XI = grid.mesh()
        vals = np.stack([np.broadcast_to(fn(t, X, XI), grid.shape) for t in time.nodes])
        return cls(time, grid, vals, evaluator=fn, **kw)

    def __repr__(self):
        return f"SymbolFamily({self.name!r}, M={self.time.M}, grid={self.grid})"


@dataclass
class SeminormProfile:
    gamma: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.gamma) < 5:
            raise ValueError("need gamma_0 ... gamma_K with K >= 4")
        if any(g < 0 for g in self.gamma):
            raise ValueError("seminorms are nonnegative")

    @property
    def K(self) -> int:
        return len(self.gamma) - 1


# ---------------------------------------------------------------- derivatives

def _apply_stencil(f: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    f = np.moveaxis(f, axis, -1)
    n = f.shape[-1]
    central, edges = (_D1_CENTRAL, _D1_EDGE) if order == 1 else (_D2_CENTRAL, _D2_EDGE)
    out = np.empty_like(f)
    out[..., 2:n - 2] = sum(c * f[..., k:n - 4 + k] for k, c in enumerate(central))
    window = f[..., :5]
    out[..., 0] = window @ edges[0]
    out[..., 1] = window @ edges[1]
    tail = f[..., n - 5:][..., ::-1]
    sign = -1.0 if order == 1 else 1.0
    out[..., n - 1] = sign * (tail @ edges[0])
    out[..., n - 2] = sign * (tail @ edges[1])
    return np.moveaxis(out / h ** order, -1, axis)


def partial(values: np.ndarray, grid: PhaseGrid, order: Sequence[int]) -> np.ndarray:
    """``d_x^i d_xi^j`` of an array whose last two axes live on ``grid``."""
    i, j = (int(o) for o in order)
    if i < 0 or j < 0:
        raise ValueError("orders must be nonnegative")
    if i + j > 4:
        raise ValueError("derivative order above 4 is not supported")
    out = np.asarray(values)
    for axis, k, h in ((-2, i, grid.dx), (-1, j, grid.dxi)):
        for _ in range(k // 2):
            out = _apply_stencil(out, h, axis, 2)
        if k % 2:
            out = _apply_stencil(out, h, axis, 1)
    return out


def _check_resolution(grid: PhaseGrid) -> None:
    if not grid.resolves():
        raise ResolutionError(
            f"grid spacing ({grid.dx:.4g}, {grid.dxi:.4g}) exceeds 0.25*Lambda^(1/2)"
            f" = {0.25 * math.sqrt(grid.Lambda):.4g}")


def fd_derivative(s, order: Sequence[int], check_resolution: bool = True) -> np.ndarray:
    """Finite-difference partial derivative of a sampled symbol.

    Parameters
    ----------
    s : SampledSymbol or SymbolFamily
    order : (i, j)
        Derivative order in ``x`` and ``xi``; ``i + j <= 4``.

    Returns
    -------
    ndarray with the same shape as ``s.values``.  Fourth-order central
    stencils are used in the interior and one-sided 5-point stencils in the
    two outermost rows.
    """
    if sum(order) > 4:
        raise ValueError("derivative order above 4 is not supported")
    if check_resolution:
        _check_resolution(s.grid)
    return partial(s.values, s.grid, order)


def derivative_tensor(values: np.ndarray, grid: PhaseGrid, k: int) -> list:
    """All partials of total order ``k``: ``[d_x^k, d_x^{k-1} d_xi, ..., d_xi^k]``."""
    return [partial(values, grid, (k - j, j)) for j in range(k + 1)]


def _directions():
    theta = np.pi * np.arange(N_DIRECTIONS) / N_DIRECTIONS
    return np.cos(theta), np.sin(theta)


def multilinear_norm(values: np.ndarray, grid: PhaseGrid, k: int) -> np.ndarray:
    """Pointwise ``max_{|T|=1} |f^{(k)} T^k|``.

    Exact for ``k <= 2`` on real data (gradient length, Hessian spectral
    radius); sampled over 32 directions otherwise.
    """
    values = np.asarray(values)
    if k == 0:
        return np.abs(values)
    parts = derivative_tensor(values, grid, k)
    real = not np.iscomplexobj(values)
    if k == 1 and real:
        return np.hypot(parts[0], parts[1])
    if k == 2 and real:
        a, b, c = parts
        return np.abs(0.5 * (a + c)) + np.hypot(0.5 * (a - c), b)
    cos, sin = _directions()
    best = np.zeros(values.shape)
    for ct, st in zip(cos, sin):
        acc = sum(math.comb(k, j) * parts[j] * ct ** (k - j) * st ** j for j in range(k + 1))
        np.maximum(best, np.abs(acc), out=best)
    return best


def gradient_norm(values, grid) -> np.ndarray:
    return multilinear_norm(values, grid, 1)


def hessian_norm(values, grid) -> np.ndarray:
    return multilinear_norm(values, grid, 2)


def gamma_seminorms(f: SymbolFamily, K: int = 4, check_resolution: bool = True) -> SeminormProfile:
    """``gamma_k = max_{t, X} |f^{(k)}| Lambda^{-1 + k/2}`` over interior nodes."""
    if K < 4:
        raise ValueError("K must be at least 4")
    if check_resolution:
        _check_resolution(f.grid)
    inner = f.grid.interior()
    Lam = f.Lambda
    gam = []
    for k in range(K + 1):
        nk = multilinear_norm(f.values, f.grid, k)
        gam.append(float(np.max(nk[..., inner])) * Lam ** (-1.0 + k / 2.0))
    return SeminormProfile(gam)


def proper_weight_lambda(f, m: float, check_resolution: bool = True) -> np.ndarray:
    """The m-proper weight ``1 + max_{0 <= j < 2m} |f^{(j)}|^{2/(2m-j)}``."""
    if not m > 0:
        raise ValueError("m must be positive")
    if check_resolution:
        _check_resolution(f.grid)
    values = f.values
    lam = np.zeros(values.shape)
    j = 0
    while j < 2 * m:
        nj = multilinear_norm(values, f.grid, j)
        np.maximum(lam, nj ** (2.0 / (2.0 * m - j)), out=lam)
        j += 1
    return 1.0 + lam


# ---------------------------------------------------------------- weight checks

def _subsample(grid: PhaseGrid, weight: np.ndarray, max_points: int):
    sx = max(1, math.ceil(grid.N_x / max_points))
    sy = max(1, math.ceil(grid.N_xi / max_points))
    w = np.asarray(weight)[..., ::sx, ::sy]
    X, XI = grid.mesh()
    pts = np.stack([X[::sx, ::sy].ravel(), XI[::sx, ::sy].ravel()], axis=1)
    return pts, w.reshape(w.shape[:-2] + (-1,))


def _pair_scan(pts: np.ndarray, w: np.ndarray, score: Callable, chunk: int = 256):
    """Return (max score, i, j) over all ordered pairs; ``score(wi, wj, d2)``."""
    best, bi, bj = -np.inf, 0, 0
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk]
        d2 = ((p[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        s = score(w[start:start + chunk, None], w[None, :], d2)
        k = int(np.argmax(s))
        if s.flat[k] > best:
            best = float(s.flat[k])
            bi, bj = start + k // len(pts), k % len(pts)
    return best, bi, bj


def _as_slices(weight):
    """Distinct time slices of a weight and their original indices."""
    weight = np.asarray(weight, dtype=float)
    if weight.ndim == 2:
        weight = weight[None]
    _, idx = np.unique(weight.reshape(len(weight), -1), axis=0, return_index=True)
    idx = np.sort(idx)
    return weight[idx], idx


def check_slow_variation(weight, grid: PhaseGrid, r: float, C: float,
                         max_points: int = 64, name: str = "slow_variation",
                         reference: str = "slowly varying metric") -> CheckEntry:
    """Brute-force check of ``C^-1 <= w(X)/w(Y) <= C`` when ``|X-Y|^2 <= r^2 w(X)``.

    The scan runs over all pairs of a grid subsampled to at most
    ``max_points`` per axis, on every time slice of a stacked weight.
    """
    slices, origin = _as_slices(weight)
    if np.any(slices <= 0):
        raise ValueError("weight must be strictly positive")
    pts, ws = _subsample(grid, slices, max_points)

    def score(wi, wj, d2):
        ratio = np.maximum(wi / wj, wj / wi)
        return np.where(d2 <= r * r * wi, ratio, 1.0)

    worst, wit = 1.0, None
    for k, w in enumerate(ws):
        best, i, j = _pair_scan(pts, w, score)
        if best > worst or wit is None:
            worst = max(worst, best)
            wit = {"slice": int(origin[k]), "X": pts[i].tolist(), "Y": pts[j].tolist(),
                   "w_X": float(w[i]), "w_Y": float(w[j]), "ratio": best}
    return CheckEntry(name, reference, margin=C - worst, tolerance=0.0,
                      passed=worst <= C, witness=wit)


def check_temperance(weight, grid: PhaseGrid, C: float, N: int = 1,
                     max_points: int = 64, name: str = "temperance",
                     reference: str = "temperate weight") -> CheckEntry:
    """Brute-force check of ``w(X)/w(Y) <= C (1 + |X-Y|^2)^N``.

    The witness carries the smallest exponent that would make the worst pair
    pass with the given ``C`` (``exponent_fit``).
    """
    slices, origin = _as_slices(weight)
    if np.any(slices <= 0):
        raise ValueError("weight must be strictly positive")
    pts, ws = _subsample(grid, slices, max_points)

    def score(wi, wj, d2):
        return (wi / wj) / (1.0 + d2) ** N

    def expo(wi, wj, d2):
        ratio = wi / wj
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.log(ratio / C) / np.log1p(d2)
        return np.where((ratio > C) & (d2 > 0), e, 0.0)

    worst, wit, fit = -np.inf, None, 0.0
    for k, w in enumerate(ws):
        best, i, j = _pair_scan(pts, w, score)
        fit = max(fit, _pair_scan(pts, w, expo)[0])
        if best > worst:
            worst = best
            wit = {"slice": int(origin[k]), "X": pts[i].tolist(), "Y": pts[j].tolist(),
                   "w_X": float(w[i]), "w_Y": float(w[j]), "ratio_over_bound": best}
    wit["exponent_fit"] = fit
    wit["constant_fit"] = worst
    return CheckEntry(name, reference, margin=C - worst, tolerance=0.0,
                      passed=worst <= C, witness=wit)


def default_tol(Lambda: float) -> float:
    return 1e-9 * Lambda


def validate_psi(f: SymbolFamily, tol: Optional[float] = None) -> CheckEntry:
    """Discrete sign rule: once ``q(t, X) > tol``, later slices stay ``>= -tol``.

    Sets ``f.psi_validated`` on success.  The witness holds the first time
    index where the value became positive, the violating later index and the
    phase point.
    """
    if tol is None:
        tol = default_tol(f.Lambda)
    if not f.is_real:
        raise ValueError("the sign rule applies to real families")
    q = f.values
    seen = np.logical_or.accumulate(q > tol, axis=0)
    bad = seen & (q < -tol)
    ok = not bool(bad.any())
    witness = None
    margin = 0.0
    if not ok:
        s, ix, iy = (int(v) for v in np.argwhere(bad)[0])
        t = int(np.argmax(q[:, ix, iy] > tol))
        witness = {"t": float(f.time.nodes[t]), "s": float(f.time.nodes[s]),
                   "X": [float(f.grid.x[ix]), float(f.grid.xi[iy])],
                   "q_t": float(q[t, ix, iy]), "q_s": float(q[s, ix, iy])}
        margin = float(np.min(np.where(bad, q, np.inf)) + tol)
    f.psi_validated = ok
    return CheckEntry("psi_sign_rule", "sign rule in time", margin=margin,
                      tolerance=tol, passed=ok, witness=witness)


# ---------------------------------------------------------------- CSV I/O

def _fmt(v: float) -> str:
    return repr(float(v))


def write_symbol_csv(s: SampledSymbol, path) -> None:
    """Header row ``N_x, N_xi, L_x, L_xi, Lambda`` then row-major values.

    Complex symbols write the real rows followed by the imaginary rows.
    """
    g = s.grid
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow([g.N_x, g.N_xi, _fmt(g.L_x), _fmt(g.L_xi), _fmt(g.Lambda)])
        blocks = [s.values] if s.is_real else [s.values.real, s.values.imag]
        for block in blocks:
            for row in block:
                w.writerow([_fmt(v) for v in row])


def read_symbol_csv(path) -> SampledSymbol:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    grid = PhaseGrid(int(head[0]), int(head[1]), float(head[2]), float(head[3]), float(head[4]))
    body = np.array([[float(v) for v in row] for row in rows[1:]])
    if body.shape == (grid.N_x, grid.N_xi):
        return SampledSymbol(grid, body)
    if body.shape == (2 * grid.N_x, grid.N_xi):
        return SampledSymbol(grid, body[:grid.N_x] + 1j * body[grid.N_x:])
    raise GridError(f"CSV body shape {body.shape} does not match header")


def write_family_csv(f: SymbolFamily, directory, stem: str = "slice") -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, sl in enumerate(f.slices):
        p = directory / f"{stem}_t{k:03d}.csv"
        write_symbol_csv(sl, p)
        paths.append(p)
    return paths


__all__ = [
    "PhaseGrid", "TimeGrid", "SampledSymbol", "SymbolFamily", "SeminormProfile",
    "fd_derivative", "partial", "derivative_tensor", "multilinear_norm",
    "gradient_norm", "hessian_norm", "gamma_seminorms", "proper_weight_lambda",
    "check_slow_variation", "check_temperance", "validate_psi", "default_tol",
    "write_symbol_csv", "read_symbol_csv", "write_family_csv",
]

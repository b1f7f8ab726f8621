"""Weyl and Wick quantization as dense matrices on a discretized line.

A :class:`SpaceGrid` with ``N`` nodes on ``[-L, L)`` comes with a canonical
phase grid of ``2N x 2N`` nodes: the ``x`` axis is doubled (spacing ``dx/2``)
so that every midpoint ``(x_i + x_j)/2`` is a node, and the ``xi`` axis has
spacing ``1/(4L)`` over ``[-1/(2dx), 1/(2dx))``.  With these choices the
discrete kernel sum

    K(x_i, x_j) = sum_k a((x_i + x_j)/2, xi_k) exp(2i pi (x_i - x_j) xi_k) dxi

is a length-``2N`` inverse FFT, ``a = 1`` gives the identity exactly, and
Gaussian symbols give the exact samples of their continuous kernels.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.ndimage import correlate1d

from .errors import AliasingError, ConvergenceError, GridError
from .grid import PhaseGrid, SampledSymbol, partial

HERMITIAN_RTOL = 1e-10
WICK_RADIUS = 2.2  # Gaussian tail beyond this is below 1e-12 of the mass


@dataclass(frozen=True)
class SpaceGrid:
    """``N`` nodes ``x_i = -L + i dx`` with ``dx = 2L/N``; default ``L = sqrt(N)/2``."""

    N: int
    L: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise GridError("SpaceGrid needs an integer N >= 4")
        if self.L is None:
            object.__setattr__(self, "L", math.sqrt(self.N) / 2.0)
        if not self.L > 0:
            raise GridError("half-width must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def nodes(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def xi_max(self) -> float:
        return 1.0 / (2.0 * self.dx)

    def phase_grid(self, Lambda: float = 1.0) -> PhaseGrid:
        return PhaseGrid(2 * self.N, 2 * self.N, self.L, self.xi_max, Lambda)

    def matches(self, grid: PhaseGrid) -> bool:
        return (grid.N_x == 2 * self.N and grid.N_xi == 2 * self.N
                and math.isclose(grid.L_x, self.L, rel_tol=1e-12)
                and math.isclose(grid.L_xi, self.xi_max, rel_tol=1e-12))

    def inner(self, u, v) -> complex:
        return self.dx * np.vdot(u, v)

    def norm(self, u) -> float:
        return math.sqrt(self.inner(u, u).real)


class LinearOperator:
    """Dense matrix acting on coefficient vectors of a :class:`SpaceGrid`.

    The matrix already contains the ``dx`` quadrature weight, so adjoints and
    spectra are the ordinary matrix ones.
    """

    def __init__(self, matrix, grid: SpaceGrid, hermitian: bool = False):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (grid.N, grid.N):
            raise GridError(f"matrix shape {matrix.shape} does not match N={grid.N}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("operator entries must be finite")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.grid = grid
        if hermitian and not self.is_hermitian():
            raise ValueError("operator claimed Hermitian but is not")
        self.hermitian = bool(hermitian)

    def hermitian_defect(self) -> float:
        a = self.matrix
        scale = np.linalg.norm(a)
        return float(np.linalg.norm(a - a.conj().T) / scale) if scale > 0 else 0.0

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        return self.hermitian_defect() <= rtol

    @property
    def H(self) -> "LinearOperator":
        return LinearOperator(self.matrix.conj().T, self.grid, self.hermitian)

    def real_part(self) -> "LinearOperator":
        """``(A + A*)/2``."""
        a = self.matrix
        return LinearOperator(0.5 * (a + a.conj().T), self.grid, hermitian=True)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def apply(self, u) -> np.ndarray:
        return self.matrix @ np.asarray(u)

    def _wrap(self, m, herm=False):
        return LinearOperator(m, self.grid, herm)

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            return self._wrap(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def __add__(self, other):
        return self._wrap(self.matrix + other.matrix, self.hermitian and other.hermitian)

    def __sub__(self, other):
        return self._wrap(self.matrix - other.matrix, self.hermitian and other.hermitian)

    def __neg__(self):
        return self._wrap(-self.matrix, self.hermitian)

    def __mul__(self, c):
        c = complex(c)
        return self._wrap(c * self.matrix, self.hermitian and c.imag == 0)

    __rmul__ = __mul__

    @classmethod
    def identity(cls, grid: SpaceGrid) -> "LinearOperator":
        return cls(np.eye(grid.N), grid, hermitian=True)


@dataclass(frozen=True)
class CoherentProjector:
    center: tuple
    state: np.ndarray
    operator: LinearOperator


# ---------------------------------------------------------------- Weyl

def _index_maps(N: int):
    i = np.arange(N)
    I, J = np.meshgrid(i, i, indexing="ij")
    return I + J, (I - J) % (2 * N), np.where((I - J) % 2 == 0, 1.0, -1.0)


def _check_xi_convergence(a: np.ndarray, rtol: float = 1e-12) -> None:
    """The xi-sum is only trusted when the symbol is flat across the xi edges."""
    scale = max(1.0, float(np.max(np.abs(a))))
    jump = max(np.max(np.abs(a[:, 1] - a[:, 0])), np.max(np.abs(a[:, -1] - a[:, -2])),
               np.max(np.abs(a[:, -1] - a[:, 0])))
    if jump > rtol * scale:
        raise ConvergenceError(
            f"symbol varies by {jump:.3g} across the xi boundary; the kernel sum has not converged")


def weyl_quantize(a: SampledSymbol, sg: SpaceGrid, check: bool = True,
                  hermitian: Optional[bool] = None) -> LinearOperator:
    """Matrix of ``a^w`` on ``sg``; ``a`` must live on ``sg.phase_grid()``.

    Raises ``GridError`` on a grid mismatch and ``ConvergenceError`` when the
    symbol does not settle to a xi-independent value at the xi boundary.
    """
    if not sg.matches(a.grid):
        raise GridError("symbol grid does not match the space grid's phase grid")
    vals = a.values
    if check:
        _check_xi_convergence(vals)
    N = sg.N
    dxi = a.grid.dxi
    F = np.fft.ifft(vals, axis=1) * (2 * N * dxi * sg.dx)
    P, Mm, sign = _index_maps(N)
    mat = F[P, Mm] * sign
    if hermitian is None:
        hermitian = a.is_real
    return LinearOperator(mat, sg, hermitian=hermitian)


def weyl_symbol(A: LinearOperator, Lambda: float = 1.0) -> SampledSymbol:
    """Discrete inverse of :func:`weyl_quantize`.

    Only same-parity index differences are available at each midpoint, so
    the result is reliable for symbols supported in ``|xi| < xi_max/2``.
    """
    sg = A.grid
    N = sg.N
    P, Mm, sign = _index_maps(N)
    H = np.zeros((2 * N, 2 * N), dtype=complex)
    H[P, Mm] = A.matrix * sign / sg.dx
    vals = 2.0 * sg.dx * np.fft.fft(H, axis=1)
    return SampledSymbol(sg.phase_grid(Lambda), vals)


# ---------------------------------------------------------------- Wick

def _gauss_kernel(h: float) -> np.ndarray:
    half = int(math.ceil(WICK_RADIUS / h))
    z = h * np.arange(-half, half + 1)
    k = np.exp(-2.0 * math.pi * z * z)
    return k / k.sum()


def gaussian_smooth(values: np.ndarray, grid: PhaseGrid, padding: str = "odd") -> np.ndarray:
    """Convolution of the last two axes with ``2 exp(-2 pi |X|^2)``.

    ``padding='odd'`` extends by point reflection about the edge node
    (``2*edge - mirror``), which preserves affine functions and equals zero
    padding for symbols vanishing near the boundary; ``'zero'`` pads with 0.
    """
    out = np.asarray(values)
    if np.iscomplexobj(out):
        return (gaussian_smooth(out.real, grid, padding)
                + 1j * gaussian_smooth(out.imag, grid, padding))
    out = out.astype(float)
    for axis, h in ((-2, grid.dx), (-1, grid.dxi)):
        k = _gauss_kernel(h)
        half = len(k) // 2
        pad = [(0, 0)] * out.ndim
        pad[axis % out.ndim] = (half, half)
        if padding == "odd":
            padded = np.pad(out, pad, mode="reflect", reflect_type="odd")
        elif padding == "zero":
            padded = np.pad(out, pad, mode="constant")
        else:
            raise ValueError(f"unknown padding {padding!r}")
        sm = correlate1d(padded, k, axis=axis, mode="constant")
        sl = [slice(None)] * out.ndim
        sl[axis % out.ndim] = slice(half, half + out.shape[axis])
        out = sm[tuple(sl)]
    return out


def wick_symbol(a: SampledSymbol, padding: str = "odd") -> SampledSymbol:
    """Weyl symbol of ``a^Wick``, i.e. ``a * 2 exp(-2 pi Gamma)``."""
    return SampledSymbol(a.grid, gaussian_smooth(a.values, a.grid, padding))


def wick_quantize(a: SampledSymbol, sg: SpaceGrid, padding: str = "odd",
                  check: bool = True) -> LinearOperator:
    return weyl_quantize(wick_symbol(a, padding), sg, check=check)


def coherent_state(Y, sg: SpaceGrid) -> np.ndarray:
    """``2^{1/4} exp(-pi (x-y)^2) exp(2i pi (x - y/2) eta)`` sampled on ``sg``."""
    y, eta = float(Y[0]), float(Y[1])
    x = sg.nodes
    return 2 ** 0.25 * np.exp(-math.pi * (x - y) ** 2) * np.exp(2j * math.pi * (x - y / 2) * eta)


def coherent_projector(Y, sg: SpaceGrid, margin: float = 4.0) -> CoherentProjector:
    """Rank-one projector onto the coherent state at ``Y``.

    ``Y`` must lie at least ``margin`` inside the phase box of ``sg``.
    """
    y, eta = float(Y[0]), float(Y[1])
    if abs(y) > sg.L - margin or abs(eta) > sg.xi_max - margin:
        raise GridError(f"center {Y} is closer than {margin} to the box boundary")
    phi = coherent_state(Y, sg)
    op = LinearOperator(sg.dx * np.outer(phi, phi.conj()), sg, hermitian=True)
    return CoherentProjector((y, eta), phi, op)


def projector_pair_symbol(Y, Z, X, XI) -> np.ndarray:
    """Closed-form Weyl symbol of ``Sigma_Y Sigma_Z`` (n = 1)."""
    y, eta = Y
    z, zeta = Z
    d2 = (y - z) ** 2 + (eta - zeta) ** 2
    # [(x, xi), (y, eta)] = xi*y - eta*x
    bracket = (XI - eta) * (X - z) - (XI - zeta) * (X - y)
    mid2 = (X - 0.5 * (y + z)) ** 2 + (XI - 0.5 * (eta + zeta)) ** 2
    return (np.exp(-math.pi * d2 / 2) * np.exp(-2j * math.pi * bracket)
            * 2.0 * np.exp(-2 * math.pi * mid2))


# ---------------------------------------------------------------- Moyal

def _spectrum(values: np.ndarray, shape) -> np.ndarray:
    """Fourier coefficients ``A[U]`` with ``a(X) = sum_U A[U] e^{2i pi U.(X - X_0)}``."""
    padded = np.zeros(shape, dtype=complex)
    padded[:values.shape[0], :values.shape[1]] = values
    return np.fft.fft2(padded) / (shape[0] * shape[1])


def _outer_energy(A: np.ndarray) -> float:
    px, py = A.shape
    fx = np.abs(np.fft.fftfreq(px))[:, None]
    fy = np.abs(np.fft.fftfreq(py))[None, :]
    outer = (fx > 0.25) | (fy > 0.25)
    tot = np.sum(np.abs(A) ** 2)
    return float(np.sum(np.abs(A[outer]) ** 2) / tot) if tot > 0 else 0.0


def moyal_product(a: SampledSymbol, b: SampledSymbol, alias_tol: float = 1e-8) -> SampledSymbol:
    """Weyl composition ``a # b`` by an exact twisted convolution of spectra.

    Both symbols are zero-padded to twice the box, expanded in Fourier modes
    and combined with ``e^{2i pi U1.X} # e^{2i pi U2.X} = e^{i pi (w1 u2 - w2 u1)}
    e^{2i pi (U1+U2).X}`` where ``U = (u, w)`` is dual to ``(x, xi)``.  The
    result is cropped back to the original box.

    Raises ``AliasingError`` when either input keeps more than ``alias_tol``
    of its spectral energy in the outer half of the frequency box.
    """
    if a.grid.shape != b.grid.shape or a.grid.dx != b.grid.dx or a.grid.dxi != b.grid.dxi:
        raise GridError("moyal_product needs both symbols on the same grid")
    g = a.grid
    shape = (2 * g.N_x, 2 * g.N_xi)
    A = _spectrum(a.values, shape)
    B = _spectrum(b.values, shape)
    for name, S in (("a", A), ("b", B)):
        e = _outer_energy(S)
        if e > alias_tol:
            raise AliasingError(f"symbol {name} has relative outer spectral energy {e:.3g}")
    px, py = shape
    u = np.fft.fftfreq(px, d=g.dx)   # dual to x
    w = np.fft.fftfreq(py, d=g.dxi)  # dual to xi
    # A and B expand about the corner X_0, so a(X) = sum A e^{2i pi U.(X-X_0)}.
    # Reexpand about the origin: coefficient of e^{2i pi U.X} is A e^{-2i pi U.X_0}.
    x0, xi0 = -g.L_x, -g.L_xi
    phase0 = np.exp(-2j * math.pi * (u[:, None] * x0 + w[None, :] * xi0))
    A0 = A * phase0
    B0 = B * phase0
    FA = np.fft.fft(A0, axis=0)  # along u, for circular convolution over u
    C0 = np.zeros(shape, dtype=complex)
    E = np.exp(1j * math.pi * np.outer(u, w))       # e^{i pi u w}
    Ec = E.conj()
    jw = np.arange(py)
    for kw in range(py):
        Bw = B0 * E[:, kw:kw + 1]                     # e^{i pi w u2}
        FB = np.fft.fft(Bw, axis=0)
        cols = (kw - jw) % py                         # index of w - w2
        conv = np.fft.ifft(FA[:, cols] * FB, axis=0)  # [u, w2]
        C0[:, kw] = np.sum(conv * Ec, axis=1)         # e^{-i pi w2 u}
    # back to the grid: c(X_j) = sum_U C0 e^{2i pi U.X_j}
    C = C0 / phase0
    vals = np.fft.ifft2(C) * (px * py)
    vals = vals[:g.N_x, :g.N_xi]
    return SampledSymbol(g, vals)


def poisson_bracket(a: SampledSymbol, b: SampledSymbol) -> SampledSymbol:
    """``{a, b} = d_xi a d_x b - d_x a d_xi b`` by finite differences."""
    g = a.grid
    va, vb = a.values, b.values
    val = (partial(va, g, (0, 1)) * partial(vb, g, (1, 0))
           - partial(va, g, (1, 0)) * partial(vb, g, (0, 1)))
    return SampledSymbol(g, val)


# ---------------------------------------------------------------- linear algebra

def _matrix(A):
    return A.matrix if isinstance(A, LinearOperator) else np.asarray(A)


def hermitian_min_eig(A) -> float:
    """Smallest eigenvalue of ``(A + A*)/2``; ``A`` must be Hermitian to 1e-10."""
    m = _matrix(A)
    scale = np.linalg.norm(m)
    if scale > 0 and np.linalg.norm(m - m.conj().T) > HERMITIAN_RTOL * scale:
        raise ValueError("hermitian_min_eig needs a Hermitian operator")
    h = 0.5 * (m + m.conj().T)
    return float(scipy.linalg.eigh(h, eigvals_only=True, subset_by_index=[0, 0])[0])


def hermitian_spectrum(A) -> np.ndarray:
    m = _matrix(A)
    return scipy.linalg.eigh(0.5 * (m + m.conj().T), eigvals_only=True)


def smallest_singular_value(A) -> float:
    m = _matrix(A)
    return float(scipy.linalg.svdvals(m).min())


def write_operator_csv(A: LinearOperator, path) -> None:
    """Real rows followed by imaginary rows, row-major, repr-exact floats."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow([A.grid.N, repr(float(A.grid.L))])
        for block in (A.matrix.real, A.matrix.imag):
            for row in block:
                w.writerow([repr(float(v)) for v in row])


def read_operator_csv(path) -> LinearOperator:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    sg = SpaceGrid(int(rows[0][0]), float(rows[0][1]))
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    return LinearOperator(body[:sg.N] + 1j * body[sg.N:], sg)

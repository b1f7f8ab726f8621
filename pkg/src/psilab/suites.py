"""Check suites shared by the batch runner and the acceptance tests.

Each function returns a list of :class:`CheckEntry`; helpers that also
measure constants return them in a dict alongside.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .catalog import a4_pair, catalog, default_params, fitting_ell0
from .energy import (C_E, almost_orthogonality, energy_certificate, loss_fit, random_zeroth_order,
                     stationary_positivity, wick_drift_positivity)
from .geometry import (GeometryFields, check_delta0_monotone, check_gradient_points,
                       check_inclusion_chain, check_lipschitz, check_weight_order, fit_C0,
                       geometry_fields, weight_constant)
from .grid import PhaseGrid, SampledSymbol, SymbolFamily, TimeGrid, check_slow_variation, \
    check_temperance, validate_psi
from .multiplier import C_H, build_multiplier, check_thm_245, certify_with_halving, smoothed_fields
from .quantize import (LinearOperator, SpaceGrid, coherent_projector, hermitian_min_eig,
                       moyal_product, projector_pair_symbol, weyl_quantize, weyl_symbol,
                       wick_quantize)
from .report import CheckEntry

SMOOTHED_C_MAX = 25.0


def _entry(name, ref, value, bound, witness=None, upper=True, tol=0.0) -> CheckEntry:
    """``value <= bound`` (or ``>=`` with ``upper=False``) as a check entry."""
    margin = (bound - value) if upper else (value - bound)
    ok = bool(np.isfinite(value)) and margin >= -tol
    return CheckEntry(name, ref, margin=float(margin), tolerance=tol, passed=ok,
                      witness=dict(witness or {}, value=float(value), bound=float(bound)))


def ratio(values: Sequence[float]) -> float:
    """Max over min; a constant sequence (zero included) has ratio 1."""
    v = np.asarray(values, dtype=float)
    if np.all(np.isfinite(v)) and v.min() == v.max():
        return 1.0
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        return math.inf
    return float(v.max() / v.min())


def with_ell0(name: str, params: Optional[dict], ell0: float) -> Optional[dict]:
    """Fill ``ell0`` for families that take it, unless given explicitly."""
    if "ell0" not in default_params(name):
        return dict(params or {}) or None
    p = dict(params or {})
    p.setdefault("ell0", ell0)
    return p


# ---------------------------------------------------------------- quantization

def _random_bumps(grid: PhaseGrid, rng, n: int = 4, spread: float = 2.0) -> np.ndarray:
    X, XI = grid.mesh()
    v = np.zeros(grid.shape)
    for c in rng.uniform(-spread, spread, (n, 2)):
        w = rng.uniform(0.05, 1.0)
        v += rng.uniform(0.2, 1.0) * np.exp(-math.pi * ((X - c[0]) ** 2 + (XI - c[1]) ** 2) / w)
    return v


def quantization_axioms(sg: SpaceGrid, symbols: Sequence[SampledSymbol] = (), seed: int = 0,
                        n_random: int = 3) -> list:
    """Wick identity, norm bound, positivity and agreement with Weyl on linear forms."""
    g = sg.phase_grid()
    X, XI = g.mesh()
    rng = np.random.default_rng(seed)
    out = []
    Id = wick_quantize(SampledSymbol(g, np.ones(g.shape)), sg).matrix
    out.append(_entry("wick_identity", "Wick quantization of 1 is the identity",
                      float(np.linalg.norm(Id - np.eye(sg.N), 2)), 1e-8))

    worst_norm, worst_pos = 0.0, math.inf
    cases = [(s.grid, s.values) for s in symbols]
    cases += [(g, _random_bumps(g, rng)) for _ in range(n_random)]
    for gg, v in cases:
        sup = float(np.abs(v).max())
        if sup == 0:
            continue
        # smoothed catalog slices keep ~1e-10 relative tails at the xi edge
        A = wick_quantize(SampledSymbol(gg, v), sg, check=False).matrix
        worst_norm = max(worst_norm, float(np.linalg.norm(A, 2)) / sup)
        if np.all(v >= 0):
            worst_pos = min(worst_pos, hermitian_min_eig(A) / sup)
    out.append(_entry("wick_norm_bound", "Wick quantization is bounded by the sup norm",
                      worst_norm, 1.0 + 1e-6, {"cases": len(cases)}))
    out.append(_entry("wick_positivity", "Wick quantization is positive", worst_pos, -1e-8,
                      upper=False))

    c = rng.standard_normal(3)
    lin = SampledSymbol(g, c[0] * X + c[1] * XI + c[2])
    Aw = weyl_quantize(lin, sg, check=False).matrix
    Ak = wick_quantize(lin, sg, check=False).matrix
    out.append(_entry("wick_weyl_linear", "Wick and Weyl agree on linear forms",
                      float(np.linalg.norm(Aw - Ak, 2) / np.linalg.norm(Aw, 2)), 1e-8))
    return out


def coherent_projector_checks(sg: SpaceGrid, n_pairs: int = 20, seed: int = 0,
                              margin: float = 4.0) -> list:
    """Trace, idempotence, Hermiticity, pair-product norm decay and pair symbol."""
    g = sg.phase_grid()
    X, XI = g.mesh()
    rng = np.random.default_rng(seed)
    lim = min(sg.L, sg.xi_max) - margin
    tr = idem = herm = 0.0
    norm_ratio, sym_err = 0.0, 0.0
    band = np.abs(XI) < sg.xi_max / 2
    for _ in range(n_pairs):
        Y, Z = rng.uniform(-lim, lim, 2), rng.uniform(-lim, lim, 2)
        PY = coherent_projector(Y, sg, margin).operator.matrix
        PZ = coherent_projector(Z, sg, margin).operator.matrix
        tr = max(tr, abs(np.trace(PY) - 1))
        idem = max(idem, float(np.abs(PY @ PY - PY).max()))
        herm = max(herm, float(np.abs(PY - PY.conj().T).max()))
        P = PY @ PZ
        d2 = float(np.sum((Y - Z) ** 2))
        norm_ratio = max(norm_ratio, float(np.linalg.norm(P, 2)) / (2.0 * math.exp(-math.pi * d2 / 2)))
        s = weyl_symbol(LinearOperator(P, sg)).values
        sym_err = max(sym_err, float(np.abs(s - projector_pair_symbol(Y, Z, X, XI))[band].max()))
    return [
        _entry("projector_trace", "coherent projector has trace one", tr, 1e-8),
        _entry("projector_idempotent", "coherent projector is idempotent", idem, 1e-8),
        _entry("projector_hermitian", "coherent projector is self-adjoint", herm, 1e-8),
        _entry("projector_pair_norm", "pair products decay like a Gaussian", norm_ratio, 1.0 + 1e-3,
               {"pairs": n_pairs}),
        _entry("projector_pair_symbol", "closed-form symbol of a projector pair", sym_err, 1e-6,
               {"region": "|xi| < xi_max/2"}),
    ]


def moyal_checks(N: int = 64, lambdas: Sequence[float] = (4, 8, 16, 32, 64), C: float = 1.0,
                 fit_N: int = 128) -> tuple:
    """Composition identity on resolved symbols and the scaling exponent of ``b#b - b^2``.

    Returns ``(entries, exponent)``.
    """
    sg = SpaceGrid(N)
    g = sg.phase_grid()
    X, XI = g.mesh()
    a = SampledSymbol(g, np.exp(-math.pi * ((X - 0.3) ** 2 + XI ** 2) / 0.8))
    b = SampledSymbol(g, (X + 0.5 * XI) * np.exp(-math.pi * (X ** 2 + (XI - 0.2) ** 2) / 0.6))
    c = moyal_product(a, b)
    lhs = weyl_quantize(a, sg).matrix @ weyl_quantize(b, sg).matrix
    err = float(np.linalg.norm(lhs - weyl_quantize(c, sg, check=False).matrix, 2))
    h2 = g.dx ** 2 + g.dxi ** 2
    out = [_entry("moyal_composition", "Weyl composition formula", err, C * h2, {"h2": h2})]

    def beta(y1, y2):
        return np.exp(-math.pi * (y1 ** 2 + y2 ** 2) / 2) * (1 + 0.3 * y1)
    defects = []
    for lam in lambdas:
        s = math.sqrt(lam)
        gl = PhaseGrid(fit_N, fit_N, 4.0 * s, 4.0 * s, float(lam))
        Xl, XIl = gl.mesh()
        bb = SampledSymbol(gl, s * beta(Xl / s, XIl / s))
        defects.append(float(np.abs(moyal_product(bb, bb).values - bb.values ** 2).max()))
    expo = float(np.polyfit(np.log(lambdas), np.log(defects), 1)[0])
    out.append(_entry("moyal_scaling", "second-order remainder of b#b for m = 1/2",
                      expo, 2 * 0.5 - 1 + 0.15, {"defects": defects, "lambdas": list(lambdas)}))
    return out, expo


# ---------------------------------------------------------------- geometry

def geometry_checks(fields: GeometryFields, r1: float = 0.25, C_slow: float = 8.0,
                    C_temp: float = 8.0, max_points: int = 48, temp_points: int = 32,
                    gradient_points: int = 10, seed: int = 0, n_samples: int = 10_000) -> tuple:
    """Per-Lambda geometry entries and measured constants ``{C, C0, ...}``."""
    g = fields.grid
    out = [validate_psi(fields.q), check_inclusion_chain(fields), check_lipschitz(fields),
           check_delta0_monotone(fields), check_weight_order(fields)]
    for wname, W in (("lambda", fields.lambda_proper), ("mu", fields.mu), ("nu", fields.nu)):
        out.append(check_slow_variation(W, g, r1, C_slow, max_points=max_points,
                                        name=f"slow_variation_{wname}",
                                        reference=f"{wname} is slowly varying"))
        out.append(check_temperance(W, g, C_temp, 1, max_points=temp_points,
                                    name=f"temperance_{wname}", reference=f"{wname} is temperate"))
    out.append(check_gradient_points(fields, r1, gradient_points, seed))
    C0, wit = fit_C0(fields, n_samples, seed)
    out.append(_entry("C0_finite", "multiplier symbol inequality constant", C0, 1e3, wit))
    consts = {"C": weight_constant(fields), "C0": C0}
    return out, consts


def stability_entries(per_lambda: dict, keys: Sequence[str], bound: float, prefix: str,
                      reference: str) -> list:
    """``max/min < bound`` across the sweep for each measured constant."""
    out = []
    lams = sorted(per_lambda)
    for k in keys:
        vals = [per_lambda[L][k] for L in lams]
        r = ratio(vals)
        out.append(CheckEntry(f"{prefix}_{k}_stability", reference, margin=bound - r, tolerance=0.0,
                              passed=r < bound,
                              witness={"lambdas": lams, "values": vals, "ratio": r}))
    return out


# ---------------------------------------------------------------- multiplier

def multiplier_checks(fields: GeometryFields, C_h: float, T: Optional[float] = None,
                      smoothed_C_max: float = SMOOTHED_C_MAX) -> tuple:
    mf = build_multiplier(fields, T)
    entries = check_thm_245(mf, fields, C_h=C_h)
    _, consts, sm = smoothed_fields(mf, fields, smoothed_C_max)
    return entries + [sm], mf


def multiplier_with_halving(name: str, params: Optional[dict], grid: PhaseGrid, M: int,
                            T0: float, C_h: float) -> tuple:
    """Multiplier inequality entries with automatic halving of ``T`` until check (d) passes."""
    def family_at(T):
        return catalog(name, params, grid, TimeGrid(T, M))
    T, mf, geom, entries = certify_with_halving(family_at, T0)
    if C_h != C_H:
        entries = check_thm_245(mf, geom, C_h=C_h)
    for e in entries:
        e.witness["T"] = T
    return entries, mf, geom


# ---------------------------------------------------------------- energy

def energy_checks(q: SymbolFamily, sg: SpaceGrid, slack: Optional[float] = None,
                  nodes: Optional[Sequence[int]] = None, stationary: bool = True,
                  orthogonality: bool = True, C_e: float = C_E) -> tuple:
    """Certificates at interior nodes; returns ``(entries, {"c0_min", "C1_max", ...})``."""
    geom = geometry_fields(q)
    mf = build_multiplier(geom)
    M = mf.time.M
    nodes = list(range(1, M - 1)) if nodes is None else list(nodes)
    out, c0s, c1s = [], [], []
    for k in nodes:
        cert = energy_certificate(q, mf, k, sg, slack, C_e=C_e)
        c0s.append(cert.c0_star)
        out.append(cert.to_entry())
    kmid = M // 2
    out.append(wick_drift_positivity(mf, kmid, sg))
    if stationary:
        for k in nodes:
            e = stationary_positivity(q, mf, geom, k, sg, slack=slack)
            c1s.append(e.witness["C1"])
        C1 = float(max(c1s))
        out.append(_entry("stationary_C1_finite", "smallest admissible stationary constant",
                          C1, 2.0 ** 20, {"per_node": c1s}))
    consts = {"c0_min": float(min(c0s)), "c0_per_node": c0s}
    if stationary:
        consts["C1_max"] = C1
    if orthogonality:
        C, lo, hi, part = almost_orthogonality(geom.nu[kmid], sg, q.Lambda)
        out.append(CheckEntry("almost_orthogonality", "partition pieces are almost orthogonal",
                              margin=min(C - 1.0, 50.0 - C), tolerance=0.0,
                              passed=1.0 <= C <= 50.0,
                              witness={"C": C, "min_eig": lo, "max_eig": hi, "pieces": len(part)}))
        consts["orthogonality_C"] = C
    return out, consts


def energy_family(name: str, params: Optional[dict], sg: SpaceGrid, Lambda: float,
                  tg: TimeGrid, lambda_max: Optional[float] = None) -> SymbolFamily:
    """Catalog family on the operator grid, ``ell0`` fixed across the sweep.

    The support radius grows like ``Lambda^{1/2}`` and fits the box at ``lambda_max``.
    """
    ell0 = fitting_ell0(sg.L, lambda_max if lambda_max is not None else Lambda)
    return catalog(name, with_ell0(name, params, ell0), sg.phase_grid(Lambda), tg)


# ---------------------------------------------------------------- loss

def loss_checks(sg: SpaceGrid, tg: TimeGrid, lambdas: Sequence[float], params: Optional[dict] = None,
                perturb_seed: Optional[int] = None, alpha_tol: float = 0.0) -> tuple:
    """Model-operator sweep: ``b1 = t Lambda bump`` with a bump fixed in absolute units."""
    def make(Lam):
        p = with_ell0("a4_model", params, fitting_ell0(sg.L, Lam))
        return a4_pair(p, sg.phase_grid(Lam), tg)
    perturb = None
    if perturb_seed is not None:
        SR = random_zeroth_order(sg, tg.M, perturb_seed)
        perturb = lambda Lam: SR  # noqa: E731
    fit = loss_fit(make, lambdas, sg, tg, perturb)
    tag = "_perturbed" if perturb is not None else ""
    out = [
        CheckEntry(f"loss_exponent{tag}", "loss of one half power of Lambda at most",
                   margin=min(fit.fitted_exponent + 0.55, alpha_tol - fit.fitted_exponent),
                   tolerance=alpha_tol,
                   passed=-0.55 <= fit.fitted_exponent <= alpha_tol,
                   witness=fit.to_dict()),
        CheckEntry(f"loss_lower_bound{tag}", "sigma_min >= c Lambda^-1/2 T^-1",
                   margin=fit.c, tolerance=0.0, passed=fit.c > 0 and min(fit.sigma_mins) > 0,
                   witness={"c": fit.c}),
    ]
    return out, fit

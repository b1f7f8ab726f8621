"""Suite orchestration: ``run`` for one configuration, ``sweep`` along an axis."""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .catalog import DEFAULT_ELL0, catalog, scaled_phase_grid
from .config import RunConfig
from .errors import ConfigError, PsilabError
from .geometry import geometry_fields
from .grid import PhaseGrid, TimeGrid, write_symbol_csv, SampledSymbol
from .multiplier import build_multiplier
from .quantize import SpaceGrid
from .report import PLUMBING, CheckEntry, VerificationReport
from . import suites

log = logging.getLogger("psilab")

FIELD_NAMES = ("q", "delta0", "mu", "nu", "lambda", "R", "m", "eta", "theta", "rho1")


def _phase_grid(cfg: RunConfig, Lambda: float, ell0: float) -> PhaseGrid:
    gs = cfg.grid
    if gs.L_x is None and gs.L_xi is None:
        g = scaled_phase_grid(Lambda, gs.N_x, ell0)
        return PhaseGrid(gs.N_x, gs.N_xi, g.L_x, g.L_x, Lambda)
    if gs.L_x is None or gs.L_xi is None:
        raise ConfigError("set both L_x and L_xi, or neither")
    return PhaseGrid(gs.N_x, gs.N_xi, gs.L_x, gs.L_xi, Lambda)


def _geometry_ell0(cfg: RunConfig) -> float:
    return float(cfg.symbol.params.get("ell0", DEFAULT_ELL0))


def geometry_family(cfg: RunConfig, Lambda: float, T: Optional[float] = None):
    ell0 = _geometry_ell0(cfg)
    g = _phase_grid(cfg, Lambda, ell0)
    params = suites.with_ell0(cfg.symbol.family, cfg.symbol.params, ell0)
    tg = TimeGrid(cfg.time.T if T is None else T, cfg.time.M)
    return catalog(cfg.symbol.family, params, g, tg), params, g


def _failure(name: str, exc: Exception) -> CheckEntry:
    wit = {"error": type(exc).__name__, "message": str(exc)}
    extra = getattr(exc, "witness", None)
    if extra:
        wit["witness"] = extra
    return CheckEntry(name, PLUMBING, margin=-math.inf, tolerance=0.0, passed=False, witness=wit)


def _tag(entries, Lambda):
    for e in entries:
        e.witness = dict(e.witness or {}, Lambda=Lambda)
    return entries


def run(cfg: RunConfig) -> VerificationReport:
    """Run the configured suites for each Lambda; module errors become failed entries."""
    tol = cfg.tolerances
    sg = SpaceGrid(cfg.grid.space_N)
    lam_max = max(cfg.lambdas)
    rep = VerificationReport(environment={
        "symbol": {"family": cfg.symbol.family, "params": dict(cfg.symbol.params)},
        "grid": cfg.grid.model_dump(), "time": cfg.time.model_dump(),
        "lambda": list(cfg.lambdas), "seed": cfg.seed, "suites": list(cfg.suites),
    })
    geo_consts, en_consts = {}, {}
    for Lam in cfg.lambdas:
        log.info("Lambda = %g", Lam)
        if "quantize" in cfg.suites:
            try:
                q = suites.energy_family(cfg.symbol.family, cfg.symbol.params, sg, Lam,
                                         TimeGrid(cfg.time.T, cfg.time.M), lam_max)
                slices = [q.slice(k) for k in (0, cfg.time.M // 2, cfg.time.M - 1)]
                rep.extend(_tag(suites.quantization_axioms(sg, slices, cfg.seed), Lam))
            except PsilabError as exc:
                rep.add(_failure("quantize_suite", exc))
        fields = None
        if {"geometry", "multiplier"} & set(cfg.suites):
            try:
                q, params, g = geometry_family(cfg, Lam)
                fields = geometry_fields(q)
            except PsilabError as exc:
                rep.add(_failure("geometry_setup", exc))
        if "geometry" in cfg.suites and fields is not None:
            try:
                ents, consts = suites.geometry_checks(
                    fields, cfg.r1, tol.slow_variation_C, tol.temperance_C, seed=cfg.seed)
                rep.extend(_tag(ents, Lam))
                geo_consts[Lam] = consts
            except PsilabError as exc:
                rep.add(_failure("geometry_suite", exc))
        if "multiplier" in cfg.suites and fields is not None:
            try:
                ents, _, _ = suites.multiplier_with_halving(
                    cfg.symbol.family, params, g, cfg.time.M, cfg.time.T, tol.multiplier_C_h)
                rep.extend(_tag(ents, Lam))
            except PsilabError as exc:
                rep.add(_failure("multiplier_suite", exc))
        if "energy" in cfg.suites:
            try:
                q = suites.energy_family(cfg.symbol.family, cfg.symbol.params, sg, Lam,
                                         TimeGrid(cfg.time.T, cfg.time.M), lam_max)
                ents, consts = suites.energy_checks(q, sg, tol.energy_slack,
                                                    C_e=tol.energy_C_e)
                rep.extend(_tag(ents, Lam))
                en_consts[Lam] = consts
            except PsilabError as exc:
                rep.add(_failure("energy_suite", exc))
    if len(geo_consts) > 1:
        rep.extend(suites.stability_entries(geo_consts, ("C", "C0"), tol.stability_ratio,
                                            "geometry", "constants stable across Lambda"))
    if len(en_consts) > 1 and cfg.symbol.family != "zero":
        rep.extend(suites.stability_entries(en_consts, ("c0_min", "C1_max"),
                                            tol.energy_stability_ratio, "energy",
                                            "energy constants stable across Lambda"))
    if "loss" in cfg.suites:
        ls = cfg.loss
        try:
            lsg, ltg = SpaceGrid(ls.N), TimeGrid(ls.T, ls.M)
            ents, _ = suites.loss_checks(lsg, ltg, ls.lambdas, alpha_tol=tol.alpha_fit_tol)
            rep.extend(ents)
            if ls.perturb_seed is not None:
                ents, _ = suites.loss_checks(lsg, ltg, ls.lambdas, perturb_seed=ls.perturb_seed,
                                             alpha_tol=tol.alpha_fit_tol)
                rep.extend(ents)
        except PsilabError as exc:
            rep.add(_failure("loss_suite", exc))
    if cfg.output:
        rep.write(cfg.output)
    if cfg.dump_fields:
        export_fields(cfg, cfg.dump_fields, Path(cfg.output).parent if cfg.output else Path("."))
    return rep


def sweep(cfg: RunConfig, axis: str = "lambda") -> dict:
    """Re-run the energy and loss computations along an axis.

    Returns a dict with the loss fit, per-point constants and stability ratios.
    """
    tol = cfg.tolerances
    fam = cfg.symbol.family
    if axis == "lambda":
        points = sorted(cfg.lambdas)
    elif axis == "T":
        points = [cfg.time.T / 2 ** k for k in range(4)]
    elif axis == "grid":
        points = [cfg.grid.space_N // 2 ** k for k in range(3, -1, -1)]
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    if len(points) < 4:
        raise ConfigError("a sweep needs at least four axis points")
    table = []
    lam_max = max(cfg.lambdas)
    for p in points:
        Lam = p if axis == "lambda" else lam_max
        T = p if axis == "T" else cfg.time.T
        N = int(p) if axis == "grid" else cfg.grid.space_N
        sg = SpaceGrid(N)
        q = suites.energy_family(fam, cfg.symbol.params, sg, Lam, TimeGrid(T, cfg.time.M),
                                 Lam if axis == "grid" else lam_max)
        _, consts = suites.energy_checks(q, sg, tol.energy_slack,
                                              orthogonality=False, C_e=tol.energy_C_e)
        row = {"point": p, "c0_min": consts["c0_min"], "C1_max": consts["C1_max"]}
        table.append(row)
        log.info("%s = %g: %s", axis, p, row)
    ls = cfg.loss
    if axis == "T":
        fits = [suites.loss_checks(SpaceGrid(ls.N), TimeGrid(T, ls.M), ls.lambdas)[1].to_dict()
                for T in points]
        loss = {"fits": fits}
    else:
        lams = points if axis == "lambda" else ls.lambdas
        loss = suites.loss_checks(SpaceGrid(ls.N), TimeGrid(ls.T, ls.M), lams)[1].to_dict()
    out = {"axis": axis, "points": points, "table": table, "loss": loss,
           "stability": {k: suites.ratio([r[k] for r in table]) for k in ("c0_min", "C1_max")}}
    ok = all(r["c0_min"] > 0 for r in table)
    if axis == "lambda":
        x = np.log(points)
        out["exponents"] = {k: float(np.polyfit(x, np.log([max(r[k], 1e-300) for r in table]), 1)[0])
                            for k in ("c0_min", "C1_max")}
        ok = ok and all(v < tol.energy_stability_ratio for v in out["stability"].values())
        ok = ok and -0.55 <= loss["fitted_exponent"] <= tol.alpha_fit_tol and loss["c"] > 0
    elif axis == "T":
        # the bound c / T must double when T halves, within 25%
        bounds = [f["c"] / f["T"] for f in loss["fits"]]
        steps = [b2 / b1 for b1, b2 in zip(bounds, bounds[1:])]
        out["bound_ratios"] = steps
        ok = ok and all(abs(s / 2.0 - 1.0) <= 0.25 for s in steps)
    out["pass"] = bool(ok)
    return out


def _field_arrays(cfg: RunConfig, Lambda: float) -> dict:
    q, _, g = geometry_family(cfg, Lambda)
    f = geometry_fields(q)
    mf = build_multiplier(f)
    return g, {"q": q.values, "delta0": f.delta0, "mu": f.mu, "nu": f.nu,
               "lambda": f.lambda_proper, "R": f.R(), "m": mf.m, "eta": mf.eta,
               "theta": mf.theta, "rho1": mf.rho1}


def export_fields(cfg: RunConfig, names, directory) -> list:
    """Write the middle time slice of each requested field as CSV, one file per Lambda."""
    bad = [n for n in names if n not in FIELD_NAMES]
    if bad:
        raise ConfigError(f"unknown fields {bad}; known: {', '.join(FIELD_NAMES)}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for Lam in cfg.lambdas:
        g, arrays = _field_arrays(cfg, Lam)
        for n in names:
            v = arrays[n]
            path = directory / f"{n}_L{Lam:g}.csv"
            write_symbol_csv(SampledSymbol(g, v[len(v) // 2]), path)
            written.append(str(path))
    return written


def catalog_listing() -> list:
    from .catalog import catalog_description, catalog_names, default_params
    return [(n, catalog_description(n), default_params(n)) for n in catalog_names()]


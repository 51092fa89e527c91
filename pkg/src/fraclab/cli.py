"""Command-line front end: configured experiments, CSV/JSON/xy artifacts.

Every command reads one JSON config (schema-validated, unknown fields
rejected), runs the corresponding library verification, and writes its
artifacts into the output directory: CSV tables with full-precision
numbers, a ``summary.json`` with the pass/fail verdict, and whitespace
separated xy files for plotting.  A fixed seed makes runs bit-reproducible;
worker threads only split sampling into deterministic chunks.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from jsonschema import Draft202012Validator

from . import carleman as carl
from . import fields, geometry, solver, symbols
from .fractional import (MultiTermSpec, Series, TimeGrid, caputo_l1,
                         caputo_oracle, caputo_power_rule)

COMMANDS = ("caputo-check", "symbol-bracket", "char-sample", "lemma21",
            "garding", "lemma61", "solve", "carleman-sweep", "ucp-demo",
            "continuation-plan")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


def write_xy(path, columns):
    arr = np.column_stack(columns)
    with open(path, "w") as fh:
        for row in arr:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# config schemas

_NUM = {"type": "number"}
_POSINT = {"type": "integer", "minimum": 1}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

_SPEC = {
    "type": "object",
    "properties": {"orders": {"type": "array", "items": _NUM, "minItems": 1},
                   "weights": {"type": "array", "items": _NUM, "minItems": 1}},
    "required": ["orders", "weights"],
    "additionalProperties": False,
}
_COEFFS = {
    "type": "object",
    "properties": {
        "preset": {"enum": ["identity", "diagonal-variable",
                            "rotating-anisotropic", "polynomial"]},
        "n": _POSINT,
        "amplitude": _NUM, "ratio": _NUM, "spin": _NUM, "shear": _NUM,
        "delta": _NUM, "tables": {"type": "array"},
    },
    "required": ["preset", "n"],
    "additionalProperties": False,
}
_MAP = {
    "type": "object",
    "properties": {"y_hat": {"type": "array", "items": _NUM},
                   "c": _NUM, "X": _NUM, "T": _NUM, "stage": _POSINT},
    "required": ["c", "X", "T"],
    "additionalProperties": False,
}
_WEIGHT = {"type": "object", "properties": {"X": _NUM}, "required": ["X"],
           "additionalProperties": False}
_REGION = {
    "type": "object",
    "properties": {"t": _PAIR, "xn": _PAIR, "xprime_halfwidth": _NUM},
    "additionalProperties": False,
}
_GRID = {
    "type": "object",
    "properties": {"bounds": {"type": "array", "items": _PAIR, "minItems": 1},
                   "shape": {"type": "array", "items": _POSINT, "minItems": 1},
                   "n_steps": _POSINT, "t_final": _NUM},
    "required": ["bounds", "shape", "n_steps", "t_final"],
    "additionalProperties": False,
}

SCHEMAS = {
    "caputo-check": {
        "type": "object",
        "properties": {"alphas": {"type": "array", "items": _NUM, "minItems": 1},
                       "n_steps": _POSINT, "t_final": _NUM,
                       "power": _NUM, "tol_apply": _NUM, "tol_oracle": _NUM},
        "required": ["alphas", "n_steps"],
        "additionalProperties": False,
    },
    "symbol-bracket": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "map": _MAP,
                       "weight": _WEIGHT, "region": _REGION,
                       "n_samples": _POSINT, "mode": {"enum": ["full", "principal"]},
                       "magnitude_range": _PAIR},
        "required": ["spec", "coeffs", "map", "weight", "n_samples"],
        "additionalProperties": False,
    },
    "char-sample": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "map": _MAP,
                       "weight": _WEIGHT, "region": _REGION,
                       "n_samples": _POSINT, "tol": _NUM,
                       "sigma_range": _PAIR},
        "required": ["spec", "coeffs", "map", "weight", "n_samples"],
        "additionalProperties": False,
    },
    "lemma21": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "map": _MAP,
                       "weight": _WEIGHT, "region": _REGION,
                       "n_samples": _POSINT, "tol": _NUM,
                       "sigma_range": _PAIR},
        "required": ["spec", "coeffs", "map", "weight", "n_samples"],
        "additionalProperties": False,
    },
    "garding": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "map": _MAP,
                       "weight": _WEIGHT, "region": _REGION,
                       "n_samples": _POSINT, "varpi_max": _NUM,
                       "magnitude_range": _PAIR},
        "required": ["spec", "coeffs", "map", "weight", "n_samples"],
        "additionalProperties": False,
    },
    "lemma61": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "map": _MAP,
                       "weight": _WEIGHT, "region": _REGION,
                       "n_samples": _POSINT, "tol": _NUM,
                       "sigma_range": _PAIR, "stage": _POSINT},
        "required": ["spec", "coeffs", "map", "weight", "n_samples", "stage"],
        "additionalProperties": False,
    },
    "solve": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "grid": _GRID,
                       "source": {"type": "object"},
                       "manufactured": {"type": "boolean"}},
        "required": ["spec", "coeffs", "grid"],
        "additionalProperties": False,
    },
    "carleman-sweep": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "map": _MAP,
                       "weight": _WEIGHT, "grid": _GRID,
                       "betas": {"type": "array", "items": _NUM, "minItems": 2},
                       "n_bumps": _POSINT, "include_drift": {"type": "boolean"},
                       "spread_max": _NUM},
        "required": ["spec", "coeffs", "map", "weight", "grid", "betas"],
        "additionalProperties": False,
    },
    "ucp-demo": {
        "type": "object",
        "properties": {"spec": _SPEC, "coeffs": _COEFFS, "grid": _GRID,
                       "omega": _PAIR, "t_prime": _NUM,
                       "source_centers": {"type": "array", "items": _NUM},
                       "source_width": _NUM, "floor": _NUM},
        "required": ["spec", "coeffs", "grid", "omega", "t_prime",
                     "source_centers"],
        "additionalProperties": False,
    },
    "continuation-plan": {
        "type": "object",
        "properties": {"T": _NUM, "X": _NUM, "s_max": _POSINT, "n": _POSINT,
                       "c": _NUM, "n_check": _POSINT},
        "required": ["T", "X", "s_max", "n"],
        "additionalProperties": False,
    },
}


class ConfigError(ValueError):
    pass


def validate_config(command: str, config) -> None:
    validator = Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(config),
                    key=lambda e: (len(e.absolute_path), str(e.absolute_path)))
    if errors:
        err = errors[0]
        where = "$" + "".join(f".{p}" if isinstance(p, str) else f"[{p}]"
                              for p in err.absolute_path)
        raise ConfigError(f"config error at {where}: {err.message}")


# ---------------------------------------------------------------------------
# builders


def _build_spec(cfg) -> MultiTermSpec:
    return MultiTermSpec(orders=tuple(cfg["orders"]),
                         weights=tuple(cfg["weights"]))


def _build_map(cfg, n) -> geometry.HolmgrenMap:
    y_hat = np.asarray(cfg.get("y_hat", np.zeros(n)), dtype=float)
    return geometry.HolmgrenMap(y_hat=y_hat, c=cfg["c"], X=cfg["X"],
                                T=cfg["T"], stage=cfg.get("stage", 1))


def _build_region(cfg, weight, T) -> symbols.SampleRegion:
    if cfg is None:
        return symbols.region_for(weight, T=T)
    base = symbols.region_for(weight, T=T)
    return symbols.SampleRegion(
        t_range=tuple(cfg.get("t", base.t_range)),
        xn_range=tuple(cfg.get("xn", base.xn_range)),
        xprime_halfwidth=cfg.get("xprime_halfwidth", base.xprime_halfwidth))


def _build_grid(cfg) -> solver.SpaceTimeGrid:
    time = TimeGrid.from_interval(cfg["t_final"], cfg["n_steps"])
    return solver.SpaceTimeGrid(bounds=tuple(tuple(b) for b in cfg["bounds"]),
                                shape=tuple(cfg["shape"]), time=time)


N_CHUNKS = 16


def _chunk_counts(total: int):
    """Fixed split independent of the worker count, so the seed list and
    the merged result do not depend on --threads."""
    chunks = max(1, min(N_CHUNKS, total))
    base = total // chunks
    return [base + (1 if i < total % chunks else 0) for i in range(chunks)]


def _parallel_char_samples(region, spec, coeffs, weight, c, total, tol,
                           seed, threads, sigma_range):
    """Deterministic chunked sampling; merge order is fixed by chunk index."""
    counts = _chunk_counts(total)
    seeds = np.random.SeedSequence(seed).spawn(len(counts))

    def run(i):
        rng = np.random.default_rng(seeds[i])
        return symbols.char_set_sample(region, spec, coeffs, weight, c,
                                       counts[i], tol=tol, rng=rng,
                                       sigma_range=sigma_range)

    if threads <= 1:
        parts = [run(i) for i in range(len(counts))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(counts))))
    n = coeffs.n
    cat = lambda key: np.concatenate([getattr(p, key) for p in parts])
    kappas = [p.kappa for p in parts if p.found > 0]
    return symbols.CharacteristicSample(
        t=cat("t"), x=cat("x"), tau=cat("tau"), xi=cat("xi"),
        sigma=cat("sigma"), residual=cat("residual"), requested=total,
        kappa=max(kappas) if kappas else math.nan)


def _point_rows(sample):
    for i in range(sample.found):
        yield ([sample.t[i]] + list(sample.x[i]) + [sample.tau[i]]
               + list(sample.xi[i]) + [sample.sigma[i], sample.residual[i]])


def _point_header(n):
    return (["t"] + [f"x{i + 1}" for i in range(n)] + ["tau"]
            + [f"xi{i + 1}" for i in range(n)] + ["sigma", "residual"])


# ---------------------------------------------------------------------------
# command handlers (each returns a summary dict with a "pass" entry)


def run_caputo_check(config, out, rng, threads):
    alphas = config["alphas"]
    n_steps = config["n_steps"]
    t_final = config.get("t_final", 1.0)
    p = config.get("power", 2.0)
    tol_apply = config.get("tol_apply", 0.05)
    tol_oracle = config.get("tol_oracle", 1e-8)
    grid = TimeGrid.from_interval(t_final, n_steps)
    rows = []
    worst_apply = worst_oracle = 0.0
    for alpha in alphas:
        u = Series.from_function(lambda t: t**p, grid)
        disc = caputo_l1(u.values, alpha, grid.dt)[-1]
        exact = caputo_power_rule(p, alpha, t_final)
        if alpha != 1.0:
            orc = caputo_oracle(lambda t: t**p,
                                lambda t, a=alpha: (p * t**(p - 1.0)
                                                    if a < 1.0
                                                    else p * (p - 1.0) * t**(p - 2.0)),
                                alpha, t_final)
        else:
            orc = exact
        e_apply = abs(disc - exact) / abs(exact)
        e_oracle = abs(orc - exact) / abs(exact)
        worst_apply = max(worst_apply, e_apply)
        worst_oracle = max(worst_oracle, e_oracle)
        rows.append([alpha, p, t_final, n_steps, disc, orc, exact,
                     e_apply, e_oracle])
    write_csv(os.path.join(out, "caputo.csv"),
              ["alpha", "power", "t", "n_steps", "discrete", "oracle",
               "exact", "rel_err_discrete", "rel_err_oracle"], rows)
    write_xy(os.path.join(out, "caputo_errors.xy"),
             [np.asarray(alphas), np.array([r[7] for r in rows])])
    ok = worst_apply <= tol_apply and worst_oracle <= tol_oracle
    return {"pass": bool(ok), "max_rel_err_discrete": worst_apply,
            "max_rel_err_oracle": worst_oracle}


def _symbol_setup(config):
    spec = _build_spec(config["spec"])
    base = fields.field_from_config(config["coeffs"])
    hmap = _build_map(config["map"], base.n)
    frame = geometry.pushforward_operator(base, hmap)
    weight = symbols.CarlemanWeightParams(X=config["weight"]["X"])
    region = _build_region(config.get("region"), weight, hmap.T)
    return spec, base, hmap, frame, weight, region


def run_symbol_bracket(config, out, rng, threads):
    spec, _, hmap, frame, weight, region = _symbol_setup(config)
    n = frame.field.n
    pts = symbols.full_region_sample(
        region, spec, n, config["n_samples"], rng,
        magnitude_range=tuple(config.get("magnitude_range", (1.0, 1e3))))
    full, principal, scale, ratio = symbols.bracket_report_batch(
        pts, spec, frame.field, weight, hmap.c)
    t, x, tau, xi, sigma = pts
    rows = []
    for i in range(len(t)):
        rows.append([t[i]] + list(x[i]) + [tau[i]] + list(xi[i])
                    + [sigma[i], full[i], principal[i], scale[i], ratio[i]])
    header = (["t"] + [f"x{i + 1}" for i in range(n)] + ["tau"]
              + [f"xi{i + 1}" for i in range(n)]
              + ["sigma", "bracket", "principal", "scale", "ratio"])
    write_csv(os.path.join(out, "brackets.csv"), header, rows)
    write_xy(os.path.join(out, "bracket_ratio.xy"),
             [np.arange(len(ratio)), np.sort(ratio)])
    return {"pass": True, "n_samples": len(t),
            "min_ratio": float(np.min(ratio)),
            "max_ratio": float(np.max(ratio))}


def run_char_sample(config, out, rng, threads, seed):
    spec, _, hmap, frame, weight, region = _symbol_setup(config)
    sample = _parallel_char_samples(
        region, spec, frame.field, weight, hmap.c, config["n_samples"],
        config.get("tol", 1e-8), seed, threads,
        tuple(config["sigma_range"]) if "sigma_range" in config else None)
    write_csv(os.path.join(out, "char_points.csv"),
              _point_header(frame.field.n), _point_rows(sample))
    if sample.found:
        write_xy(os.path.join(out, "char_residuals.xy"),
                 [np.linspace(0.0, 1.0, sample.found),
                  np.sort(sample.residual)])
    ok = sample.found == sample.requested
    return {"pass": bool(ok), "requested": sample.requested,
            "found": sample.found, "kappa": sample.kappa,
            "max_residual": float(sample.residual.max())
            if sample.found else math.nan}


def run_lemma21(config, out, rng, threads, seed):
    spec, _, hmap, frame, weight, region = _symbol_setup(config)
    sample = _parallel_char_samples(
        region, spec, frame.field, weight, hmap.c, config["n_samples"],
        config.get("tol", 1e-8), seed, threads,
        tuple(config["sigma_range"]) if "sigma_range" in config else None)
    report = symbols.lemma21_check(sample, spec, frame.field, weight, hmap.c)
    write_csv(os.path.join(out, "char_points.csv"),
              _point_header(frame.field.n), _point_rows(sample))
    _, _, _, ratio = symbols.bracket_report_batch(
        (sample.t, sample.x, sample.tau, sample.xi, sample.sigma),
        spec, frame.field, weight, hmap.c)
    srt = np.sort(ratio)
    write_xy(os.path.join(out, "lemma21_ratios.xy"),
             [np.linspace(0.0, 1.0, len(srt)), srt])
    return {"pass": bool(report.passed), "min_ratio": report.min_ratio,
            "n_samples": report.n_samples, "kappa": sample.kappa,
            "found": sample.found, "requested": sample.requested}


def run_garding(config, out, rng, threads, seed):
    spec, _, hmap, frame, weight, region = _symbol_setup(config)
    n = frame.field.n
    total = config["n_samples"]
    counts = _chunk_counts(total)
    seeds = np.random.SeedSequence(seed).spawn(len(counts))
    parts = [symbols.full_region_sample(
        region, spec, n, counts[i], np.random.default_rng(seeds[i]),
        magnitude_range=tuple(config.get("magnitude_range", (1.0, 1e3))))
        for i in range(len(counts))]
    pts = tuple(np.concatenate([p[j] for p in parts]) for j in range(5))
    varpi, report = symbols.find_min_varpi(
        pts, spec, frame.field, weight, hmap.c,
        varpi_max=config.get("varpi_max", 1e8))
    sweep_varpis = [varpi * f for f in (0.25, 0.5, 1.0, 2.0, 4.0) if varpi * f > 0]
    curve = [(v, symbols.garding_precondition_check(
        pts, spec, frame.field, weight, hmap.c, v).min_ratio)
        for v in sweep_varpis] or [(0.0, report.min_ratio)]
    write_xy(os.path.join(out, "garding_curve.xy"),
             [np.array([c[0] for c in curve]), np.array([c[1] for c in curve])])
    write_csv(os.path.join(out, "garding.csv"),
              ["varpi", "min_ratio"], [[v, r] for v, r in curve])
    return {"pass": bool(report.passed), "varpi": varpi,
            "min_ratio": report.min_ratio, "n_samples": report.n_samples}


def run_lemma61(config, out, rng, threads, seed):
    spec = _build_spec(config["spec"])
    base = fields.field_from_config(config["coeffs"])
    tilde = geometry.global_coefficients(base)
    map_cfg = dict(config["map"])
    map_cfg["stage"] = config["stage"]
    hmap = _build_map(map_cfg, base.n)
    frame = geometry.pushforward_operator(tilde, hmap)
    weight = symbols.CarlemanWeightParams(X=config["weight"]["X"])
    region = _build_region(config.get("region"), weight, hmap.T)
    sample = _parallel_char_samples(
        region, spec, frame.field, weight, hmap.c, config["n_samples"],
        config.get("tol", 1e-8), seed, threads,
        tuple(config["sigma_range"]) if "sigma_range" in config else None)
    report = symbols.lemma61_check(sample, spec, tilde, hmap, weight, rng=rng)
    write_csv(os.path.join(out, "char_points.csv"),
              _point_header(base.n), _point_rows(sample))
    if sample.found:
        write_xy(os.path.join(out, "char_residuals.xy"),
                 [np.linspace(0.0, 1.0, sample.found),
                  np.sort(sample.residual)])
    ok = report.passed and report.extras["ellipticity_margin"] >= -1e-12
    return {"pass": bool(ok), "min_ratio": report.min_ratio,
            "stage": config["stage"],
            "ellipticity_margin": report.extras["ellipticity_margin"],
            "found": sample.found, "requested": sample.requested}


def _manufactured_pieces(spec, grid):
    """u* = t^2 prod sin(pi y_d) and the matching identity-coefficient source."""
    def exact(t, Y):
        v = np.asarray(t, dtype=float) ** 2
        for d in range(grid.ndim):
            v = v * np.sin(np.pi * Y[..., d])
        return v

    def source(t, Y):
        sine = np.ones(Y.shape[:-1])
        for d in range(grid.ndim):
            sine = sine * np.sin(np.pi * Y[..., d])
        tfrac = sum(q * caputo_power_rule(2.0, al, max(t, 0.0))
                    for q, al in zip(spec.weights, spec.orders))
        return (tfrac + grid.ndim * np.pi**2 * t**2) * sine

    return exact, source


def run_solve(config, out, rng, threads):
    spec = _build_spec(config["spec"])
    coeffs = fields.field_from_config(config["coeffs"])
    grid = _build_grid(config["grid"])
    manufactured = config.get("manufactured", True)
    if manufactured:
        exact, source = _manufactured_pieces(spec, grid)
    else:
        src_cfg = config.get("source", {})
        center = np.asarray(src_cfg.get("center", [0.5] * grid.ndim))
        width = src_cfg.get("width", 0.1)

        def source(t, Y):
            r2 = np.sum(((Y - center) / width) ** 2, axis=-1)
            return np.clip(1.0 - r2, 0.0, None) ** 4 * min(t, 1.0) ** 2
        exact = None
    result = solver.solve(spec, coeffs, solver.LowerOrderTerm.zero(), source,
                          grid)
    sol = result.field
    solver.save_solution(sol, os.path.join(out, "solution"))
    solver.export_time_slice_csv(sol, grid.time.n_steps,
                                 os.path.join(out, "final_slice.csv"))
    final = sol.values[-1]
    if grid.ndim == 1:
        write_xy(os.path.join(out, "final_profile.xy"),
                 [grid.axes()[0], final])
    else:
        write_xy(os.path.join(out, "final_profile.xy"),
                 [np.arange(final.size), final.reshape(-1)])
    summary = {"pass": result.diagnostics["equation_residual_max"] <= 1e-10,
               **{k: v for k, v in result.diagnostics.items()}}
    if exact is not None:
        err = np.abs(sol.values - np.stack(
            [exact(t, grid.mesh()) for t in grid.time.nodes]))
        summary["max_error"] = float(err.max())
    summary["pass"] = bool(summary["pass"])
    return summary


def run_carleman_sweep(config, out, rng, threads):
    spec = _build_spec(config["spec"])
    base = fields.field_from_config(config["coeffs"])
    hmap = _build_map(config["map"], base.n)
    frame = geometry.pushforward_operator(base, hmap)
    weight = symbols.CarlemanWeightParams(X=config["weight"]["X"])
    grid = _build_grid(config["grid"])
    sweep_cfg = carl.BetaSweepConfig(
        betas=tuple(config["betas"]), weight=weight, spec=spec,
        include_drift=config.get("include_drift", True))
    bumps = carl.default_bump_family(weight, grid,
                                     count=config.get("n_bumps", 5))
    result = carl.beta_sweep(sweep_cfg, bumps, grid, frame)
    carl.sweep_rows_csv(result, os.path.join(out, "sweep.csv"))
    result.to_json(os.path.join(out, "sweep_summary.json"))
    for tid, pairs in result.ratios_by_test().items():
        pairs = sorted(pairs)
        write_xy(os.path.join(out, f"ratio_test{tid}.xy"),
                 [np.array([p[0] for p in pairs]),
                  np.array([p[1] for p in pairs])])
    spread_max = config.get("spread_max", 100.0)
    spread = (result.max_ratio / result.min_ratio
              if result.min_ratio > 0 else math.inf)
    ok = (result.flagged == 0 and math.isfinite(result.max_ratio)
          and spread <= spread_max
          and not result.top_half_monotone_growth())
    return {"pass": bool(ok), "max_ratio": result.max_ratio,
            "min_ratio": result.min_ratio, "spread": spread,
            "flagged": result.flagged,
            "top_half_monotone_growth": result.top_half_monotone_growth()}


def run_ucp_demo(config, out, rng, threads):
    spec = _build_spec(config["spec"])
    coeffs = fields.field_from_config(config["coeffs"])
    grid = _build_grid(config["grid"])
    ucp = solver.UcpConfig(
        spec=spec, coeffs=coeffs, grid=grid, omega=tuple(config["omega"]),
        t_prime=config["t_prime"],
        source_centers=tuple(config["source_centers"]),
        source_width=config.get("source_width", 0.08))
    report = solver.ucp_experiment(ucp, floor=config.get("floor", 1e-13))
    write_csv(os.path.join(out, "ucp.csv"),
              ["center", "distance", "norm_window", "norm_total", "ratio"],
              report.rows)
    write_xy(os.path.join(out, "ucp_ratio.xy"),
             [np.array([r[1] for r in report.rows]),
              np.array([r[4] for r in report.rows])])
    return {"pass": bool(report.all_above_floor),
            "min_ratio": report.min_ratio, "floor": report.floor}


def run_continuation_plan(config, out, rng, threads):
    schedule = geometry.continuation_schedule(
        T=config["T"], X=config["X"], s_max=config["s_max"], n=config["n"],
        c=config.get("c", 1.0))
    geometry.schedule_to_json(schedule, os.path.join(out, "schedule.json"))
    # quick self-check: exact round trips and the stage recursion
    n_check = config.get("n_check", 1000)
    worst = 0.0
    for hmap, _ in schedule:
        t = rng.uniform(0.0, config["T"], n_check)
        y = rng.normal(size=(n_check, config["n"]))
        _, x = hmap.forward(t, y)
        _, back = hmap.inverse(t, x)
        worst = max(worst, float(np.abs(back - y).max()))
    stage_gap = 0.0
    for (m1, _), (m2, _) in zip(schedule, schedule[1:]):
        t = rng.uniform(0.0, config["T"], n_check)
        y = rng.normal(size=(n_check, config["n"]))
        x1 = m1.forward(t, y)[1][..., -1]
        x2 = m2.forward(t, y)[1][..., -1]
        gap = x2 - (x1 + config["X"] * t / config["T"] - config["X"])
        stage_gap = max(stage_gap, float(np.abs(gap).max()))
    ok = worst <= 1e-14 and stage_gap <= 1e-14
    return {"pass": bool(ok), "stages": config["s_max"],
            "roundtrip_error": worst, "stage_identity_error": stage_gap}


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fraclab",
        description="configured verification runs with CSV/JSON/xy artifacts")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            config = json.load(fh)
        validate_config(args.command, config)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    try:
        if args.command == "caputo-check":
            summary = run_caputo_check(config, args.out, rng, args.threads)
        elif args.command == "symbol-bracket":
            summary = run_symbol_bracket(config, args.out, rng, args.threads)
        elif args.command == "char-sample":
            summary = run_char_sample(config, args.out, rng, args.threads,
                                      args.seed)
        elif args.command == "lemma21":
            summary = run_lemma21(config, args.out, rng, args.threads,
                                  args.seed)
        elif args.command == "garding":
            summary = run_garding(config, args.out, rng, args.threads,
                                  args.seed)
        elif args.command == "lemma61":
            summary = run_lemma61(config, args.out, rng, args.threads,
                                  args.seed)
        elif args.command == "solve":
            summary = run_solve(config, args.out, rng, args.threads)
        elif args.command == "carleman-sweep":
            summary = run_carleman_sweep(config, args.out, rng, args.threads)
        elif args.command == "ucp-demo":
            summary = run_ucp_demo(config, args.out, rng, args.threads)
        else:
            summary = run_continuation_plan(config, args.out, rng,
                                            args.threads)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    summary = {"command": args.command, "seed": args.seed, **summary}
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    print(("PASS" if summary["pass"] else "FAIL")
          + f" {args.command}: " + json.dumps(
              {k: v for k, v in summary.items() if k not in ("command",)},
              default=float))
    return 0 if summary["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())

"""Batch front door: config parsing, sweeps, threshold detection, reports.

Config files are flat key-value text, one ``dotted.key = value`` per line with
'#' comments.  Reports serialize to a stable JSON schema (see StabilityReport)
plus a plain-text column summary suitable for external plotting.

Exit codes: 0 on completion, 2 on validation errors, 3 when numerical
inconsistency diagnostics were raised during the run.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InconsistencyError, NotApplicableError, RemstabError, ValidationError
from .lie_algebra import invariant_inner_product_family
from .model_catalog import CATALOG, CatalogEntry
from .splittings import build_splitting
from .stability_analysis import (
    block_corollary_test,
    block_forms,
    full_em_test,
    rem_test,
    restricted_augmented_hessian,
)

SWEEP_REFINE_RTOL = 1e-6
# optimize_ip needs threshold evaluations far tighter than the sweep default:
# golden-section comparisons near the flat minimum would otherwise drown in noise.
OPTIMIZE_REFINE_RTOL = 1e-10


@dataclass(frozen=True)
class AnalysisConfig:
    model: str
    model_params: dict = field(default_factory=dict)
    velocity: tuple | None = None
    velocity_preset: tuple | None = None  # (name, value)
    ip_params: tuple = ()
    sweep: dict | None = None
    optimize_ip: bool = False
    oracle: bool = False
    blocks: bool = False
    tolerances: dict = field(default_factory=dict)
    output_json: str | None = None
    output_text: str | None = None
    workers: int = 1

    def validate(self) -> "AnalysisConfig":
        if self.model not in CATALOG:
            raise ValidationError(f"unknown model {self.model!r}; known: {sorted(CATALOG)}")
        if self.velocity is None and self.velocity_preset is None:
            raise ValidationError("config must set velocity or velocity.preset/velocity.value")
        if self.sweep is not None:
            for key in ("variable", "lo", "hi", "steps"):
                if key not in self.sweep:
                    raise ValidationError(f"sweep.{key} missing")
            lo, hi = float(self.sweep["lo"]), float(self.sweep["hi"])
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValidationError("sweep range must be finite with lo < hi")
            if int(self.sweep["steps"]) < 2:
                raise ValidationError("sweep.steps must be at least 2")
        return self


def parse_config_text(text: str) -> AnalysisConfig:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key or not val:
            raise ValidationError(f"line {lineno}: empty key or value")
        entries[key] = val

    def pop(key, default=None):
        return entries.pop(key, default)

    def as_float(key, val):
        try:
            return float(val)
        except ValueError:
            raise ValidationError(f"{key}: expected a number, got {val!r}")

    def as_bool(key, val):
        low = val.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValidationError(f"{key}: expected a boolean, got {val!r}")

    model = pop("model.id")
    if model is None:
        raise ValidationError("model.id is required")

    model_params = {}
    for key in [k for k in entries if k.startswith("model.param.")]:
        model_params[key[len("model.param.") :]] = as_float(key, entries.pop(key))

    velocity = None
    vel_raw = pop("velocity")
    if vel_raw is not None:
        velocity = tuple(as_float("velocity", tok) for tok in vel_raw.split())
    preset = None
    pname, pval = pop("velocity.preset"), pop("velocity.value")
    if (pname is None) != (pval is None):
        raise ValidationError("velocity.preset and velocity.value must be set together")
    if pname is not None:
        preset = (pname, as_float("velocity.value", pval))

    ip_raw = pop("ip.params")
    ip_params = tuple(as_float("ip.params", tok) for tok in ip_raw.split()) if ip_raw else ()

    sweep = None
    if any(k.startswith("sweep.") for k in entries):
        sweep = {
            "variable": pop("sweep.variable"),
            "lo": as_float("sweep.lo", pop("sweep.lo", "nan")),
            "hi": as_float("sweep.hi", pop("sweep.hi", "nan")),
            "steps": int(as_float("sweep.steps", pop("sweep.steps", "0"))),
        }
        if sweep["variable"] is None:
            raise ValidationError("sweep.variable missing")

    tolerances = {}
    for key in [k for k in entries if k.startswith("tol.")]:
        tolerances[key[len("tol.") :]] = as_float(key, entries.pop(key))

    cfg = AnalysisConfig(
        model=model,
        model_params=model_params,
        velocity=velocity,
        velocity_preset=preset,
        ip_params=ip_params,
        sweep=sweep,
        optimize_ip=as_bool("optimize_ip", pop("optimize_ip", "false")),
        oracle=as_bool("oracle", pop("oracle", "false")),
        blocks=as_bool("blocks", pop("blocks", "false")),
        tolerances=tolerances,
        output_json=pop("output.json"),
        output_text=pop("output.text"),
        workers=int(as_float("workers", pop("workers", "1"))),
    )
    if entries:
        raise ValidationError(f"unknown config keys: {sorted(entries)}")
    return cfg.validate()


def parse_config(path: str) -> AnalysisConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


# ---------------------------------------------------------------------------
# Case resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Case:
    entry: CatalogEntry
    x: np.ndarray
    xi: np.ndarray
    ip: np.ndarray
    grid_value: float | None = None


def _build_entry(cfg: AnalysisConfig, model_params: dict) -> CatalogEntry:
    try:
        return CATALOG[cfg.model](**model_params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for model {cfg.model!r}: {exc}")


def _resolve_velocity(cfg: AnalysisConfig, entry: CatalogEntry, override: float | None = None):
    if cfg.velocity_preset is not None:
        name, value = cfg.velocity_preset
        if name not in entry.velocity_presets:
            raise ValidationError(
                f"model {entry.id!r} has no velocity preset {name!r}; "
                f"known: {sorted(entry.velocity_presets)}"
            )
        return np.asarray(entry.velocity_presets[name](override if override is not None else value))
    return np.asarray(cfg.velocity, dtype=float)


def _resolve_case(cfg: AnalysisConfig, sweep_value: float | None = None) -> _Case:
    """Build the (entry, x, xi, ip) tuple for one grid point.

    The sweep variable may name a velocity preset, an inner-product parameter
    ("ip.<index>" or "k" for the first), or a model parameter.  The analysis
    point is the first known relative equilibrium of the (re)built entry.
    """
    model_params = dict(cfg.model_params)
    ip_params = list(cfg.ip_params)
    vel_override = None
    if sweep_value is not None:
        var = cfg.sweep["variable"]
        if cfg.velocity_preset is not None and var == cfg.velocity_preset[0]:
            vel_override = sweep_value
        elif var == "k" or var.startswith("ip."):
            idx = 0 if var == "k" else int(var.split(".", 1)[1])
            while len(ip_params) <= idx:
                ip_params.append(1.0)
            ip_params[idx] = sweep_value
        elif var in model_params:
            model_params[var] = sweep_value
        else:
            raise ValidationError(f"sweep variable {var!r} is neither a preset, ip.<i>, nor a model parameter")
    entry = _build_entry(cfg, model_params)
    xi = _resolve_velocity(cfg, entry, vel_override)
    if not entry.known_re:
        raise ValidationError(f"model {entry.id!r} declares no known relative equilibrium")
    x = np.asarray(entry.known_re[0].x, dtype=float)
    ip = invariant_inner_product_family(entry.system.lie, ip_params or [1.0])
    return _Case(entry, x, xi, ip, sweep_value)


def _min_sigma_eigenvalue(case: _Case, tolerances: dict) -> float:
    split = build_splitting(case.entry.system, case.x, case.xi, case.ip,
                            tol=tolerances.get("rank", 1e-9))
    form = restricted_augmented_hessian(case.entry.system, split)
    return float(form.eigenvalues.min()) if form.eigenvalues.size else 0.0


def _analyze_case(cfg: AnalysisConfig, case: _Case) -> dict:
    sysm = case.entry.system
    params = {
        "model": case.entry.id,
        "model_params": {k: float(v) for k, v in sysm.parameters.items() if isinstance(v, (int, float))},
        "velocity": [float(v) for v in case.xi],
        "ip_diag": [float(v) for v in np.diag(case.ip)],
    }
    if case.grid_value is not None:
        params["sweep_value"] = float(case.grid_value)
    tol = cfg.tolerances.get("definiteness")
    split = build_splitting(sysm, case.x, case.xi, case.ip, tol=cfg.tolerances.get("rank", 1e-9))
    out = {
        "rem": rem_test(sysm, split, tol, gmu_compact=case.entry.gmu_compact, parameters=params).to_dict()
    }
    diagnostics = []
    if cfg.blocks:
        out["block"] = block_corollary_test(
            sysm, split, tol, gmu_compact=case.entry.gmu_compact, parameters=params
        ).to_dict()
        try:
            omega, hess = block_forms(sysm, split, tol)
            out["block_forms"] = {
                "omega_antisymmetry": omega.antisymmetry,
                "omega_degeneracy": omega.degeneracy,
                "offblock_residual": hess.offblock_residual,
                "diag_residual": hess.diag_residual,
            }
            diagnostics.extend(hess.diagnostics)
        except NotApplicableError as exc:
            out["block_forms"] = {"not_applicable": str(exc)}
    if cfg.oracle:
        out["oracle"] = full_em_test(
            sysm, case.x, case.xi, case.ip, tol,
            gmu_compact=case.entry.gmu_compact, parameters=params,
        ).to_dict()
        if out["oracle"]["verdict"] != out["rem"]["verdict"]:
            diagnostics.append(
                f"oracle verdict {out['oracle']['verdict']} disagrees with rem {out['rem']['verdict']}"
            )
    if diagnostics:
        out["diagnostics"] = diagnostics
    return out


# ---------------------------------------------------------------------------
# Threshold detection and splitting-parameter optimization
# ---------------------------------------------------------------------------


def _refine_threshold(fn, lo: float, hi: float, rtol: float) -> float:
    """Bisection on the sign of fn between lo (fn<0) and hi (fn>0)."""
    flo, fhi = fn(lo), fn(hi)
    if flo > 0 or fhi < 0:
        raise InconsistencyError("threshold bracket lost its sign change")
    while hi - lo > rtol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def detect_threshold(cfg: AnalysisConfig, grid: np.ndarray, min_eigs: list, rtol=SWEEP_REFINE_RTOL):
    """Verdict boundary: sign change of the smallest restricted-Hessian eigenvalue."""
    fn = lambda v: _min_sigma_eigenvalue(_resolve_case(cfg, v), cfg.tolerances)
    for i in range(len(grid) - 1):
        if min_eigs[i] < 0 <= min_eigs[i + 1]:
            value = _refine_threshold(fn, float(grid[i]), float(grid[i + 1]), rtol)
            return {
                "variable": cfg.sweep["variable"],
                "value": value,
                "value_squared": value * value,
                "bracket": [float(grid[i]), float(grid[i + 1])],
            }
    return None


def _threshold_for_ip(cfg: AnalysisConfig, ip_params: list, lo: float, hi: float,
                      rtol: float) -> float | None:
    """Crossing of the sweep variable for fixed ip parameters, or None."""
    probe = replace(cfg, ip_params=tuple(ip_params), sweep=dict(cfg.sweep))

    def fn(v):
        return _min_sigma_eigenvalue(_resolve_case(probe, v), cfg.tolerances)

    f_lo, v_lo = fn(lo), lo
    if f_lo > 0:
        return lo  # already stable at the lower edge
    v_hi, f_hi = hi, fn(hi)
    expansions = 0
    while f_hi <= 0 and expansions < 12:
        v_hi *= 2.0
        f_hi = fn(v_hi)
        expansions += 1
    if f_hi <= 0:
        return None
    return _refine_threshold(fn, v_lo, v_hi, rtol)


def _golden_minimize(fn, a: float, b: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > tol * max(1.0, abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (c, fc) if fc < fd else (d, fd)


def optimize_ip(cfg: AnalysisConfig) -> dict:
    """Minimize the stability threshold over the inner-product family.

    Scans a geometric grid of the first ip parameter for a unimodal bracket,
    then refines by golden section.  Parameter values whose threshold does not
    exist (no eigenvalue crossing in the expanded sweep range) are excluded
    and reported.
    """
    if cfg.sweep is None:
        raise ValidationError("optimize_ip requires a sweep section naming the threshold variable")
    lo, hi = float(cfg.sweep["lo"]), float(cfg.sweep["hi"])

    big = np.inf

    def threshold(k: float, rtol: float = OPTIMIZE_REFINE_RTOL) -> float:
        t = _threshold_for_ip(cfg, [k], lo, hi, rtol)
        return big if t is None else t

    # coarse bracketing scan; only the golden phase needs tight thresholds
    k_grid = np.geomspace(1e-3, 100.0, 32)
    values = np.array([threshold(k, 1e-2) for k in k_grid])
    finite = np.isfinite(values)
    flags = []
    if not finite.any():
        return {"excluded": True, "flags": ["no ip parameter in the scan range yields a threshold"]}
    if not finite.all():
        flags.append("part of the ip range yields no stability threshold; excluded from search")
    idx = int(np.nanargmin(np.where(finite, values, np.nan)))
    a = float(k_grid[max(0, idx - 2)])
    b = float(k_grid[min(len(k_grid) - 1, idx + 2)])
    if idx in (0, len(k_grid) - 1):
        flags.append("optimum at the edge of the scan grid")
    spread = values[finite].max() - values[finite].min()
    if spread < 1e-10 * max(1.0, abs(values[finite].max())):
        flags.append("threshold is constant in the ip parameter; any value optimal")
        best_k, best_t = float(k_grid[idx]), float(values[idx])
    else:
        best_k, best_t = _golden_minimize(threshold, a, b, 1e-3)
        # Finite-difference noise flattens the comparison landscape near the
        # minimum; a parabolic fit over a window where curvature dominates the
        # noise pins the argmin far more tightly than further bisection could.
        window = max(0.02, 0.02 * abs(best_k))
        ks = np.linspace(best_k - window, best_k + window, 9)
        ts = np.array([threshold(k) for k in ks])
        good = np.isfinite(ts)
        if good.sum() >= 5:
            coef = np.polyfit(ks[good], ts[good], 2)
            if coef[0] > 0:
                vertex = -coef[1] / (2.0 * coef[0])
                if ks[good][0] <= vertex <= ks[good][-1]:
                    best_k = float(vertex)
                    best_t = float(threshold(best_k))
    return {
        "variable": cfg.sweep["variable"],
        "best_ip_params": [best_k],
        "best_threshold": best_t,
        "best_threshold_squared": best_t * best_t,
        "flags": flags,
    }


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def _text_summary(payload: dict) -> str:
    lines = ["# remstab analysis", f"# model: {payload['config']['model']}"]
    reports = payload["reports"]
    if reports and "sweep_value" in reports[0]["rem"]["parameters"]:
        lines.append("# columns: sweep_value verdict route min_eig dim_check")
        for rep in reports:
            rem = rep["rem"]
            eigs = rem["block_spectra"].get("sigma_hessian", [])
            lines.append(
                f"{rem['parameters']['sweep_value']:.8g} {rem['verdict']} {rem['route']} "
                f"{min(eigs) if eigs else float('nan'):.8g} {rem['dim_check']}"
            )
    else:
        for rep in reports:
            rem = rep["rem"]
            eigs = rem["block_spectra"].get("sigma_hessian", [])
            lines.append(
                f"single-point {rem['verdict']} {rem['route']} "
                f"{min(eigs) if eigs else float('nan'):.8g} {rem['dim_check']}"
            )
    if payload.get("threshold"):
        t = payload["threshold"]
        lines.append(
            f"# threshold {t['variable']} = {t['value']:.10g} (squared {t['value_squared']:.10g})"
        )
    if payload.get("optimize_ip"):
        o = payload["optimize_ip"]
        if o.get("excluded"):
            lines.append("# optimize_ip: excluded (" + "; ".join(o["flags"]) + ")")
        else:
            lines.append(
                f"# optimal ip params {o['best_ip_params']} threshold {o['best_threshold']:.10g} "
                f"(squared {o['best_threshold_squared']:.10g})"
            )
            for flag in o["flags"]:
                lines.append(f"# optimize_ip flag: {flag}")
    return "\n".join(lines) + "\n"


def run_config(cfg: AnalysisConfig, json_path: str | None = None, text_path: str | None = None):
    """Run all requested analyses; returns (exit_code, payload) and writes files.

    Grid points evaluate concurrently when cfg.workers > 1; output ordering is
    by grid index either way, so results are byte-identical.
    """
    cfg = cfg.validate()
    json_path = json_path or cfg.output_json
    text_path = text_path or cfg.output_text

    exit_code = 0
    if cfg.sweep is not None:
        grid = np.linspace(float(cfg.sweep["lo"]), float(cfg.sweep["hi"]), int(cfg.sweep["steps"]))
        cases = [_resolve_case(cfg, float(v)) for v in grid]
    else:
        grid = None
        cases = [_resolve_case(cfg)]

    def work(case):
        try:
            return _analyze_case(cfg, case)
        except InconsistencyError as exc:
            return {"error": f"inconsistency: {exc}"}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(work, cases))
    else:
        reports = [work(case) for case in cases]

    for rep in reports:
        if "error" in rep or rep.get("diagnostics"):
            exit_code = 3

    threshold = None
    if grid is not None and all("rem" in r for r in reports):
        min_eigs = [
            min(r["rem"]["block_spectra"].get("sigma_hessian") or [float("nan")]) for r in reports
        ]
        threshold = detect_threshold(cfg, grid, min_eigs)

    optimize = optimize_ip(cfg) if cfg.optimize_ip else None

    payload = {
        "config": {
            "model": cfg.model,
            "model_params": dict(cfg.model_params),
            "ip_params": list(cfg.ip_params),
            "sweep": dict(cfg.sweep) if cfg.sweep else None,
        },
        "reports": reports,
        "threshold": threshold,
        "optimize_ip": optimize,
    }
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if text_path:
        with open(text_path, "w", encoding="utf-8") as fh:
            fh.write(_text_summary(payload))
    return exit_code, payload


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="remstab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    ana = sub.add_parser("analyze", help="run the analyses described by a config file")
    ana.add_argument("config", help="path to a flat key-value config file")
    ana.add_argument("--json", dest="json_path", default=None, help="write the JSON report here")
    ana.add_argument("--text", dest="text_path", default=None, help="write the text summary here")
    ana.add_argument("--oracle", action="store_true", help="also run the brute-force oracle")
    ana.add_argument("--blocks", action="store_true", help="also run the block-diagonal tests")
    ana.add_argument("--tol", type=float, default=None, help="override the definiteness tolerance")
    ana.add_argument("--workers", type=int, default=None, help="concurrent grid evaluations")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if args.oracle:
            cfg = replace(cfg, oracle=True)
        if args.blocks:
            cfg = replace(cfg, blocks=True)
        if args.tol is not None:
            cfg = replace(cfg, tolerances={**cfg.tolerances, "definiteness": args.tol})
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
        code, _ = run_config(cfg, args.json_path, args.text_path)
        return code
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RemstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
